"""
Bundled datasets.

Each dataset has its own folder with:
- dataset.json: Descriptor (file, design, column meanings, suggested settings)
- the CSV file it names

Usage:
    from datasets import load_dataset_sample
    sample = load_dataset_sample('body_fat_drss', columns=['X1', 'X2', 'Y'])
"""

import os
import json
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd


def get_dataset_list() -> List[str]:
    """Get list of bundled datasets."""
    datasets_dir = os.path.dirname(__file__)
    datasets = []
    for name in os.listdir(datasets_dir):
        dataset_path = os.path.join(datasets_dir, name)
        if os.path.isdir(dataset_path) and not name.startswith('_'):
            if os.path.exists(os.path.join(dataset_path, 'dataset.json')):
                datasets.append(name)
    return sorted(datasets)


def dataset_path(dataset: str, filename: Optional[str] = None) -> str:
    """Path of a file inside a dataset folder (the data file by default)."""
    if filename is None:
        filename = load_dataset_descriptor(dataset)['file']
    return os.path.join(os.path.dirname(__file__), dataset, filename)


def load_dataset_descriptor(dataset: str) -> Dict[str, Any]:
    """Load the descriptor of a dataset."""
    descriptor_path = os.path.join(os.path.dirname(__file__), dataset, 'dataset.json')
    if not os.path.exists(descriptor_path):
        raise FileNotFoundError(f"No descriptor found for dataset: {dataset}")
    with open(descriptor_path) as f:
        return json.load(f)


def load_dataset_frame(dataset: str) -> pd.DataFrame:
    """The dataset's CSV as a DataFrame."""
    return pd.read_csv(dataset_path(dataset))


def load_dataset_sample(dataset: str, columns: Optional[Sequence[str]] = None):
    """A ranked set sample dataset as a RankedSetSample carrying its design metadata."""
    from rsentropy.designs import RankedSetSample

    descriptor = load_dataset_descriptor(dataset)
    if descriptor.get('kind') != 'ranked_set_sample':
        raise ValueError(f"{dataset} is not a ranked set sample")
    design = descriptor['design']
    columns = list(columns) if columns else list(descriptor['columns'])
    rank_by = design.get('rank_by')
    rank_index = columns.index(rank_by) if rank_by in columns else 0
    return RankedSetSample.from_frame(load_dataset_frame(dataset), columns, r=design['r'], rank_by=rank_index)
