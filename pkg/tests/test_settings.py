import json

import pytest

from errors import ConfigError
from settings import DEFAULTS, Settings, load_settings


def test_defaults_without_file(tmp_path):
    path = tmp_path / "params.json"
    path.write_text("{}")
    assert load_settings(str(path), environ={}) == Settings()


def test_bundled_file_matches_defaults():
    s = load_settings(environ={})
    assert s.node_budget == DEFAULTS['node_budget']
    assert s.default_max_len == DEFAULTS['default_max_len']


def test_file_values(tmp_path):
    path = tmp_path / "params.json"
    path.write_text(json.dumps({'default_max_len': 5, 'log_level': 'DEBUG'}))
    s = load_settings(str(path), environ={})
    assert s.default_max_len == 5
    assert s.log_level == 'DEBUG'
    assert s.json_indent == DEFAULTS['json_indent']


def test_environment_overrides_file(tmp_path):
    path = tmp_path / "params.json"
    path.write_text(json.dumps({'default_max_len': 5}))
    s = load_settings(str(path), environ={'FLOYD_DEFAULT_MAX_LEN': '11'})
    assert s.default_max_len == 11


def test_unknown_key(tmp_path):
    path = tmp_path / "params.json"
    path.write_text(json.dumps({'stone_size': 2}))
    with pytest.raises(ConfigError):
        load_settings(str(path), environ={})


def test_bad_type():
    with pytest.raises(ConfigError):
        load_settings(environ={'FLOYD_NODE_BUDGET': 'lots'})


def test_missing_and_invalid_files(tmp_path):
    with pytest.raises(ConfigError):
        load_settings(str(tmp_path / "absent.json"), environ={})
    path = tmp_path / "broken.json"
    path.write_text("{")
    with pytest.raises(ConfigError):
        load_settings(str(path), environ={})
