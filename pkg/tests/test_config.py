import json

import pytest

from rsentropy.config import (
    BandwidthTables,
    default_db_path,
    default_n_jobs,
    load_experiment_spec,
    load_reference_tables,
    read_spec_file,
)
from rsentropy.errors import ConfigurationError
from rsentropy.simlab import ExperimentSpec


@pytest.fixture
def tables():
    return BandwidthTables()


# --- bandwidth tables ---

def test_table_lookups(tables):
    assert tables.rhos == [0.5, 0.6, 0.7, 0.8, 0.9]
    assert tables.entropy_d1(1, 3, 1, 0.5) == 1.45
    assert tables.entropy_d1(1, 3, 2, 0.9) == 1.05
    assert tables.mi_d1(1, 3, 0.9) == 0.70
    assert tables.mi_d1(2, 3, 0.7) == 1.10
    assert tables.re_constant('rss', 3, 0.9) == 1.40
    assert tables.re_constant('drss', 5, 0.8) == 1.65


def test_srs_constant_ignores_set_size(tables):
    assert tables.re_constant('srs', 5, 0.9) == tables.re_constant('srs', 1, 0.9) == 1.35


def test_table_misses(tables):
    with pytest.raises(ConfigurationError):
        tables.entropy_d1(1, 3, 1, 0.95)
    with pytest.raises(ConfigurationError):
        tables.entropy_d1(3, 3, 1, 0.9)
    with pytest.raises(ConfigurationError):
        tables.mi_d1(1, 7, 0.9)
    with pytest.raises(ConfigurationError):
        tables.re_constant('mrss3', 3, 0.9)


def test_missing_tables_file(tmp_path):
    with pytest.raises(ConfigurationError):
        BandwidthTables(str(tmp_path / 'nope.json'))


def test_save_config_round_trip(tables, tmp_path):
    path = str(tmp_path / 'tables.json')
    tables.save_config(path)
    reloaded = BandwidthTables(path)
    assert reloaded.list_entropy_cells() == tables.list_entropy_cells()
    assert reloaded.entropy_d1(2, 3, 1, 0.6) == tables.entropy_d1(2, 3, 1, 0.6)
    assert reloaded.re_constant('drss', 3, 0.9) == tables.re_constant('drss', 3, 0.9)


def test_list_entropy_cells(tables):
    cells = tables.list_entropy_cells()
    assert (1, 3, 1) in cells and (2, 5, 2) in cells
    assert cells == sorted(cells)


def test_reference_tables():
    ref = load_reference_tables()
    assert {'relative_efficiency', 'mse_simulation', 'tree_study', 'variable_selection'} <= set(ref)
    assert len(ref['relative_efficiency']['rows']) == 24


# --- environment ---

def test_default_n_jobs(monkeypatch):
    monkeypatch.delenv('RSENTROPY_N_JOBS', raising=False)
    assert default_n_jobs() == 1
    monkeypatch.setenv('RSENTROPY_N_JOBS', '4')
    assert default_n_jobs() == 4
    monkeypatch.setenv('RSENTROPY_N_JOBS', 'many')
    with pytest.raises(ConfigurationError):
        default_n_jobs()


def test_default_db_path(monkeypatch, tmp_path):
    path = str(tmp_path / 'runs.db')
    monkeypatch.setenv('RSENTROPY_DB_PATH', path)
    assert default_db_path() == path


# --- spec files ---

def test_read_json_spec(tmp_path):
    path = tmp_path / 'spec.json'
    path.write_text(json.dumps({'name': 'drss', 'designs': [[3, 10, 2]], 'replications': 100}))
    assert read_spec_file(str(path)) == {'name': 'drss', 'designs': [[3, 10, 2]], 'replications': 100}


def test_read_key_value_spec(tmp_path):
    path = tmp_path / 'spec.ini'
    path.write_text(
        "name = drss_study\n"
        "rhos = [0.9, 0.8]\n"
        "designs = [[3, 10, 1], [3, 10, 2]]\n"
        "diagnostics = false\n"
        "\n"
        "[parent]\n"
        "name = bivariate_normal\n"
    )
    data = read_spec_file(str(path))
    assert data == {
        'name': 'drss_study',
        'rhos': [0.9, 0.8],
        'designs': [[3, 10, 1], [3, 10, 2]],
        'diagnostics': False,
        'parent': {'name': 'bivariate_normal'},
    }


def test_malformed_spec_files(tmp_path):
    broken = tmp_path / 'broken.json'
    broken.write_text('{"name": ')
    with pytest.raises(ConfigurationError):
        read_spec_file(str(broken))
    with pytest.raises(ConfigurationError):
        read_spec_file(str(tmp_path / 'missing.ini'))


def test_load_experiment_spec(tmp_path):
    path = tmp_path / 'spec.ini'
    path.write_text("name = small\ndesigns = [[3, 4, 1]]\nreplications = 10\nseed = 3\n")
    spec = load_experiment_spec(str(path))
    assert isinstance(spec, ExperimentSpec)
    assert spec.designs == [(3, 4, 1)] and spec.replications == 10 and spec.seed == 3

    path.write_text("name = small\nreplicates = 10\n")
    with pytest.raises(ConfigurationError):
        load_experiment_spec(str(path))
