"""Bench plumbing: dataset loading, one seeded repetition and the seed aggregate."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import django
import numpy as np
import pandas as pd
import scipy

from . import __version__
from .evaluation import AlgorithmSettings, compare
from .ingest import (
    DEFAULT_CONTEXT_COLUMNS,
    MOVIELENS_R_MAX,
    SplitSpec,
    context_subset,
    load_comoda,
    load_movielens,
    split,
)

logger = logging.getLogger(__name__)

DATASET_FORMATS = ('TAB_100K', 'COLONS_1M', 'COMODA')


@dataclass(frozen=True)
class DatasetSpec:
    """Where a ratings file lives and how to read it.

    COMODA files default to the mood and location context columns; for the
    MovieLens formats ``r_max`` defaults to the five-star scale.
    """

    path: str
    format: str = 'TAB_100K'
    context_columns: tuple = ()
    r_max: Optional[int] = None

    def __post_init__(self):
        columns = tuple(self.context_columns)
        if self.has_context and not columns:
            columns = DEFAULT_CONTEXT_COLUMNS
        object.__setattr__(self, 'context_columns', columns)

    @property
    def has_context(self):
        return self.format == 'COMODA'


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec
    split: SplitSpec = SplitSpec()
    algorithms: tuple = ('random',)
    settings: AlgorithmSettings = field(default_factory=AlgorithmSettings)
    output_dir: str = 'runs'
    repetitions: int = 5

    @property
    def seeds(self):
        return [self.split.seed + r for r in range(self.repetitions)]


@dataclass(frozen=True, eq=False)
class LoadedDataset:
    dataset: object
    contexts: Optional[list] = None
    duplicates_dropped: int = 0


def load_dataset(spec):
    path = Path(spec.path)
    with path.open('rb') as source:
        if spec.has_context:
            loaded = load_comoda(source, spec.context_columns, r_max=spec.r_max)
            return LoadedDataset(loaded.dataset, loaded.contexts, loaded.duplicates_dropped)
        loaded = load_movielens(source, spec.format, spec.r_max or MOVIELENS_R_MAX)
    return LoadedDataset(loaded.dataset, None, loaded.duplicates_dropped)


def run_seed(loaded, config, seed, threads=1):
    """Split with ``seed`` and score every configured algorithm on it."""
    split_spec = SplitSpec(config.split.test_fraction, seed)
    train, test = split(loaded.dataset, split_spec)
    contexts = None
    if loaded.contexts is not None:
        contexts = context_subset(loaded.contexts, train)
    logger.info('seed %d: %d train / %d test ratings', seed, len(train), len(test))
    return compare(
        train,
        test,
        config.algorithms,
        config.settings,
        test_fraction=split_spec.test_fraction,
        seed=seed,
        contexts=contexts,
        threads=threads,
        duplicates_dropped=loaded.duplicates_dropped,
    )


def report_frame(report):
    return pd.DataFrame(
        [(e.algorithm, e.mae, e.n_test_predictions) for e in report.entries],
        columns=['algo', 'mae', 'n'],
    )


def aggregate(reports):
    """Mean and population standard deviation of each algorithm's MAE over seeds."""
    frame = pd.concat(
        [report_frame(report).assign(seed=report.seed) for report in reports],
        ignore_index=True,
    )
    return (
        frame.groupby('algo', sort=False)
        .agg(mean=('mae', 'mean'), std=('mae', lambda s: s.std(ddof=0)), seeds=('seed', 'size'))
        .reset_index()
    )


def versions():
    return {
        'reclab': __version__,
        'django': django.get_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
    }
