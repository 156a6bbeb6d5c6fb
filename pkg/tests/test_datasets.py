import pytest

from datasets import dataset_path, get_dataset_list, load_dataset_descriptor, load_dataset_frame, load_dataset_sample


def test_body_fat_is_bundled():
    assert 'body_fat_drss' in get_dataset_list()
    descriptor = load_dataset_descriptor('body_fat_drss')
    assert descriptor['design'] == {'k': 3, 'm': 10, 'r': 2, 'rank_by': 'X1'}
    assert dataset_path('body_fat_drss').endswith('sample.csv')


def test_body_fat_frame():
    frame = load_dataset_frame('body_fat_drss')
    assert list(frame.columns) == ['cycle', 'rank', 'Y', 'X1', 'X2', 'X3']
    assert len(frame) == 30


def test_body_fat_sample():
    sample = load_dataset_sample('body_fat_drss')
    assert sample.obs.shape == (3, 10, 4)
    assert sample.design.r == 2 and sample.design.rank_by == 1
    pair = load_dataset_sample('body_fat_drss', columns=['X1', 'Y'])
    assert pair.p == 2 and pair.design.rank_by == 0


def test_unknown_dataset():
    with pytest.raises(FileNotFoundError):
        load_dataset_descriptor('redwoods')
