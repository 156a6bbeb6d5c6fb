import numpy as np
import pytest

from rsentropy.db import ResultsDatabase
from rsentropy.simlab import AggregateRow, ExperimentSpec


def make_row(scheme='rss', k=3, m=10, r=1, mse=0.02, **extra):
    return AggregateRow(
        estimator='entropy', scheme=scheme, rho=0.9, n=k * m, k=k, m=m, r=r, d1=1.2,
        target=1.4189, mean_estimate=1.40, bias=-0.0189, mse=mse, variance=0.0197,
        replications=100, seed=1, **extra
    )


@pytest.fixture
def db(tmp_path):
    return ResultsDatabase(str(tmp_path / 'results.db'))


def test_insert_and_get_run(db):
    spec = {'name': 'tiny', 'rhos': [0.9], 'seed': np.int64(4), 'grid': np.array([0.5, 1.0])}
    run_id = db.insert_run('tiny', 'entropy', 4, 100, spec)
    runs = db.get_runs()
    assert len(runs) == 1
    run = runs[0]
    assert run['id'] == run_id and run['name'] == 'tiny' and run['master_seed'] == 4
    assert run['spec'] == {'name': 'tiny', 'rhos': [0.9], 'seed': 4, 'grid': [0.5, 1.0]}
    assert 'spec_json' not in run


def test_runs_are_newest_first(db):
    first = db.insert_run('a', 'entropy', 0, 10, {})
    second = db.insert_run('b', 'mi', 0, 10, {})
    third = db.insert_run('a', 'kl', 0, 10, {})
    assert [r['id'] for r in db.get_runs()] == [third, second, first]
    assert [r['id'] for r in db.get_runs(name='a')] == [third, first]
    assert len(db.get_runs(limit=2)) == 2


def test_rows_round_trip(db):
    run_id = db.insert_run('tiny', 'entropy', 1, 100, {})
    inserted = db.insert_rows(run_id, [make_row(mean_cv=0.01), make_row(scheme='drss', r=2)])
    assert inserted == 2
    rows = db.get_rows(run_id)
    assert [r['scheme'] for r in rows] == ['rss', 'drss']
    assert rows[0]['mean_cv'] == pytest.approx(0.01)
    # NaN diagnostics come back as NULL
    assert rows[1]['mean_cv'] is None and rows[1]['var_cv'] is None
    assert rows[0]['n'] == 30 and rows[0]['rho'] == pytest.approx(0.9)


def test_rows_from_dicts_and_filter(db):
    run_id = db.insert_run('mixed', 'entropy,mi', 1, 100, {})
    mi = {**make_row().to_dict(), 'estimator': 'mi', 'target': np.float64(0.83)}
    db.insert_rows(run_id, [make_row(), mi])
    assert len(db.get_rows(run_id)) == 2
    only_mi = db.get_rows(run_id, estimator='mi')
    assert len(only_mi) == 1 and only_mi[0]['target'] == pytest.approx(0.83)


def test_delete_run(db):
    run_id = db.insert_run('tiny', 'entropy', 1, 100, {})
    db.insert_rows(run_id, [make_row()])
    assert db.delete_run(run_id) is True
    assert db.get_runs() == [] and db.get_rows(run_id) == []
    assert db.delete_run(run_id) is False


def test_save_experiment(db):
    spec = ExperimentSpec(name='saved', designs=[(3, 10, 1), (3, 10, 2)], replications=50, seed=9)
    run_id = db.save_experiment(spec, [make_row(), make_row(scheme='drss', r=2)])
    run = db.get_runs()[0]
    assert run['id'] == run_id and run['replications'] == 50 and run['master_seed'] == 9
    assert run['spec']['designs'] == [[3, 10, 1], [3, 10, 2]]
    assert len(db.get_rows(run_id)) == 2
