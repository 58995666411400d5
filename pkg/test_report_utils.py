import json
import logging

import numpy as np
import pytest
import pytz

from report_utils import (build_manifest, config_sha256, format_value, now_in_zone, read_csv, write_csv,
                          write_json, write_node_table)


def test_format_value():
    assert format_value(None) == ''
    assert format_value(True) == 'true'
    assert format_value(np.bool_(False)) == 'false'
    assert format_value(np.float64(0.1)) == '0.10000000000000001'
    assert format_value(float('nan')) == 'nan'
    assert format_value(np.int64(3)) == '3'
    assert format_value('sine') == 'sine'


def test_csv_round_trip(tmp_path):
    path = write_csv(str(tmp_path / 'a' / 't.csv'), ['n', 'value', 'rate'],
                     [{'n': 4, 'value': 0.5, 'rate': None}, {'n': 8, 'value': 0.25, 'rate': 1.0}])
    rows = read_csv(path)
    assert rows == [{'n': '4', 'value': '0.5', 'rate': ''}, {'n': '8', 'value': '0.25', 'rate': '1'}]
    with pytest.raises(KeyError):
        write_csv(str(tmp_path / 'bad.csv'), ['n'], [{'n': 1, 'extra': 2}])


def test_config_hash_ignores_key_order():
    assert config_sha256({'a': 1, 'b': [1, 2]}) == config_sha256({'b': [1, 2], 'a': 1})
    assert config_sha256({'a': 1}) != config_sha256({'a': 2})


def test_timezone_stamp(caplog):
    stamp = now_in_zone('Asia/Yangon')
    assert stamp.utcoffset().total_seconds() == 6.5 * 3600
    with caplog.at_level(logging.WARNING, logger='report_utils'):
        fallback = now_in_zone('Mars/Olympus')
    assert fallback.tzinfo is pytz.utc
    assert 'unknown timezone' in caplog.text


def test_manifest_fields(tmp_path):
    manifest = build_manifest('solve', {'seed': 1}, 1, now_in_zone('UTC'), 0.5,
                              [str(tmp_path / 'solution.csv')], np.bool_(True))
    assert manifest['artifacts'] == ['solution.csv']
    assert manifest['passed'] is True
    assert set(manifest['versions']) == {'python', 'numpy', 'scipy', 'package'}
    path = write_json(str(tmp_path / 'manifest.json'), {**manifest, 'extra': np.float64(2.0)})
    with open(path, encoding='utf-8') as fh:
        assert json.load(fh)['extra'] == 2.0


def test_node_table(tmp_path):
    path = write_node_table(str(tmp_path / 'mesh.txt'), np.array([0.0, 1.0]), np.array([[0.0, 0.5, 1.0]] * 2))
    with open(path, encoding='utf-8') as fh:
        lines = fh.read().splitlines()
    assert lines[0] == '# 2 levels 3 nodes'
    assert len(lines) == 7
    assert lines[-1] == '1 1 2 1'
