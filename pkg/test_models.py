import json
import math
import os

import pytest

from errors import ConfigurationError
from models import (dump_config, normalize_config, parse_config, scenario_from_dict, with_overrides)


SCENARIOS = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'scenarios')
MINIMAL = {'motion': {}, 'coefficient': {}}


def config_error(payload):
    with pytest.raises(ConfigurationError) as exc:
        scenario_from_dict(payload)
    return exc.value


def test_minimal_scenario_takes_defaults():
    scenario = scenario_from_dict(MINIMAL, name='minimal')
    assert scenario.name == 'minimal'
    assert scenario.motion.family == 'identity'
    assert scenario.operator.c_A is None
    assert scenario.discretization.levels == [[4, 4], [8, 8], [16, 16], [32, 32]]
    assert scenario.study.jobs == 1
    assert scenario.seed == 0


def test_shipped_scenario_parses():
    scenario = parse_config(os.path.join(SCENARIOS, 'm3_degenerate.json'))
    assert scenario.name == 'm3_degenerate'
    assert scenario.motion.family == 'separable_flow'
    assert scenario.motion.frequency == pytest.approx(2.0 * math.pi)
    assert scenario.coefficient.branch2.kind == 'zero'
    assert scenario.data.solution == 'sine_growth'
    assert scenario.seed == 3


def test_missing_required_section():
    assert config_error({'motion': {}}).key == 'coefficient'


def test_unknown_keys_are_rejected_at_every_level():
    assert config_error({**MINIMAL, 'bogus': 1}).key == 'bogus'
    assert config_error({'motion': {'speed': 1.0}, 'coefficient': {}}).key == 'motion.speed'
    error = config_error({'motion': {}, 'coefficient': {'branch1': {'kind': 'constant', 'colour': 'red'}}})
    assert error.key == 'coefficient.branch1.colour'


def test_type_errors_name_the_key():
    assert config_error({**MINIMAL, 'discretization': {'n_x': '16'}}).key == 'discretization.n_x'
    assert config_error({**MINIMAL, 'discretization': {'n_t': True}}).key == 'discretization.n_t'
    assert config_error({**MINIMAL, 'study': {'eps': 0.1}}).key == 'study.eps'
    assert config_error({**MINIMAL, 'study': {'fields': ['sine', 3]}}).key == 'study.fields[1]'
    assert config_error({'motion': {'horizon': math.inf}, 'coefficient': {}}).key == 'motion.horizon'


def test_value_errors_carry_the_nested_key():
    assert config_error({'motion': {'gamma0': 1.5}, 'coefficient': {}}).key == 'motion.gamma0'
    error = config_error({'motion': {}, 'coefficient': {'branch1': {'kind': 'cubic'}}})
    assert error.key == 'coefficient.branch1.kind'
    error = config_error({**MINIMAL, 'discretization': {'levels': [[4, 4], [8]]}})
    assert error.key == 'discretization.levels[1]'
    assert config_error({**MINIMAL, 'operator': {'c_A': 2.0, 'C_A': 1.0}}).key == 'operator.C_A'
    assert config_error({**MINIMAL, 'data': {'solution': 'gaussian'}}).key == 'data.solution'
    assert config_error({**MINIMAL, 'seed': -1}).key == 'seed'


def test_invalid_json_reports_position(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{\n  "motion": {,\n}\n', encoding='utf-8')
    with pytest.raises(ConfigurationError) as exc:
        parse_config(str(path))
    assert (exc.value.line, exc.value.column) == (2, 14)


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigurationError):
        parse_config(str(tmp_path / 'missing.json'))


def test_normalized_dump_parses_back(tmp_path):
    scenario = parse_config(os.path.join(SCENARIOS, 'heat_static.json'))
    path = dump_config(scenario, str(tmp_path / 'out' / 'config.normalized.json'))
    with open(path, encoding='utf-8') as fh:
        payload = json.load(fh)
    assert 'name' not in payload
    assert payload == json.loads(json.dumps(normalize_config(scenario)))
    assert scenario_from_dict(payload) == scenario


def test_overrides():
    scenario = scenario_from_dict({**MINIMAL, 'study': {'jobs': 2, 'tol_scale': 3.0}})
    same = with_overrides(scenario)
    assert same == scenario
    changed = with_overrides(scenario, out='elsewhere', seed=9, jobs=4)
    assert changed.output.directory == 'elsewhere'
    assert changed.seed == 9
    assert changed.study.jobs == 4
    assert changed.study.tol_scale == 3.0
    assert with_overrides(scenario, tol_scale=0.5).study.jobs == 2
