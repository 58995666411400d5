import json

import pytest

from app import main
from report_utils import read_csv


HEAT = {
    'motion': {'family': 'identity', 'gamma0': 0.5, 'horizon': 1.0},
    'coefficient': {'branch1': {'kind': 'constant', 'value': 1.0},
                    'branch2': {'kind': 'constant', 'value': 1.0}},
    'operator': {'boundary': 'dirichlet'},
    'data': {'solution': 'sine_growth'},
    'discretization': {'n_x': 4, 'n_t': 4, 'levels': [[4, 4], [8, 8]]},
    'study': {'lambda0': [-1.0, 1.0]},
    'seed': 0,
}


def write_config(tmp_path, payload, name='scenario.json'):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding='utf-8')
    return str(path)


def test_solve_writes_artifacts_and_manifest(tmp_path):
    config = write_config(tmp_path, HEAT)
    out = tmp_path / 'solve'
    assert main(['solve', '--config', config, '--out', str(out)]) == 0
    rows = read_csv(str(out / 'solution.csv'))
    assert len(rows) == 5 * 5
    assert float(rows[0]['u']) == 0.0
    summary = read_csv(str(out / 'solve_summary.csv'))[0]
    assert float(summary['relative_residual']) <= 1e-10
    assert float(summary['l2_q']) > 0.0
    manifest = json.loads((out / 'manifest.json').read_text(encoding='utf-8'))
    assert manifest['passed'] is True
    assert manifest['seed'] == 0
    assert 'solution.csv' in manifest['artifacts']
    normalized = json.loads((out / 'config.normalized.json').read_text(encoding='utf-8'))
    assert normalized['output']['directory'] == str(out)


def test_reruns_are_byte_identical(tmp_path):
    config = write_config(tmp_path, HEAT)
    first, second = tmp_path / 'first', tmp_path / 'second'
    assert main(['solve', '--config', config, '--out', str(first)]) == 0
    assert main(['solve', '--config', config, '--out', str(second), '--jobs', '2']) == 0
    for name in ('solution.csv', 'solve_summary.csv'):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_dump_system_flag(tmp_path):
    config = write_config(tmp_path, {**HEAT, 'study': {'dump_system': True}})
    out = tmp_path / 'dump'
    assert main(['solve', '--config', config, '--out', str(out)]) == 0
    for name in ('B.txt', 'M_X.txt', 'M_Y.txt', 'mesh.txt'):
        assert (out / 'system' / name).exists()


def test_shift_subcommand(tmp_path):
    config = write_config(tmp_path, HEAT)
    out = tmp_path / 'shift'
    assert main(['shift', '--config', config, '--out', str(out)]) == 0
    rows = read_csv(str(out / 'shift.csv'))
    assert [float(r['lambda0']) for r in rows] == [-1.0, 1.0]
    assert all(r['passed'] == 'true' for r in rows)


def test_convergence_on_exact_trial_solution(tmp_path):
    config = write_config(tmp_path, {
        'motion': {'family': 'identity'},
        'coefficient': {'branch1': {'kind': 'constant', 'value': 1.0},
                        'branch2': {'kind': 'constant', 'value': 2.0}},
        'operator': {'boundary': 'neumann'},
        'data': {'solution': 'bilinear'},
        'discretization': {'levels': [[4, 4], [8, 8]]},
    })
    out = tmp_path / 'convergence'
    assert main(['convergence', '--config', config, '--out', str(out)]) == 0
    orders = read_csv(str(out / 'convergence_orders.csv'))
    assert all(o['exact'] == 'true' and o['passed'] == 'true' for o in orders)


def test_configuration_errors_exit_with_two(tmp_path):
    config = write_config(tmp_path, {**HEAT, 'colour': 'red'})
    assert main(['solve', '--config', config, '--out', str(tmp_path / 'bad')]) == 2
    broken = tmp_path / 'broken.json'
    broken.write_text('{"motion": ', encoding='utf-8')
    assert main(['solve', '--config', str(broken), '--out', str(tmp_path / 'bad')]) == 2


def test_overstated_constants_are_rejected_before_the_run(tmp_path):
    config = write_config(tmp_path, {**HEAT, 'operator': {'boundary': 'dirichlet', 'c_A': 1.5, 'C_A': 2.0}})
    out = tmp_path / 'constants'
    assert main(['solve', '--config', config, '--out', str(out)]) == 2
    assert not (out / 'solution.csv').exists()


def test_unknown_subcommand_is_a_usage_error(tmp_path):
    config = write_config(tmp_path, HEAT)
    with pytest.raises(SystemExit) as exc:
        main(['explode', '--config', config])
    assert exc.value.code == 2


def test_mollify_gates_on_fitted_orders(tmp_path):
    payload = dict(HEAT, study={'fields': ['sine_oscillating', 'kinked_time'], 'h_ref': 1.0 / 64,
                                'time_panels': 64})
    out = tmp_path / 'mollify'
    assert main(['mollify', '--config', write_config(tmp_path, payload), '--out', str(out)]) == 0
    orders = {(r['field'], r['shift']): r for r in read_csv(str(out / 'mollify_orders.csv'))}
    assert len(orders) == 4
    smooth = orders[('sine_oscillating', 'false')]
    assert float(smooth['expected']) == 2.0
    assert abs(float(smooth['observed']) - 2.0) <= 0.3
    kinked = orders[('kinked_time', 'false')]
    assert float(kinked['observed']) >= 1.0
    assert all(r['passed'] == 'true' for r in orders.values())
    assert orders[('kinked_time', 'true')]['expected'] == ''
