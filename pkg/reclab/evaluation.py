import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from django.core.exceptions import ValidationError

from .baselines import CfConfig, UserRatings, item_similarities, mf_train, neighbourhood_average
from .exceptions import ContextRequiredError
from .models import EvalEntry, EvalReport, TrainConfig, clamp_predictions
from .zeroshot import ZeroShotAlgo, hybrid_train, powermat_train, train_zero_shot, zeroshot_ratios

logger = logging.getLogger(__name__)

RANDOM = 'random'
ALGORITHM_NAMES = (
    'itemcf',
    'mf',
    'zeromat',
    'dotmat',
    'poissonmat',
    'powermat',
    'zeromat-hybrid',
    'dotmat-hybrid',
    'poissonmat-hybrid',
    RANDOM,
)


class Predictor:
    """A named, total rating predictor over in-range (user, item) pairs."""

    def __init__(self, name, predict_many):
        self.name = name
        self._predict_many = predict_many

    def predict_many(self, users, items):
        return np.asarray(self._predict_many(np.asarray(users), np.asarray(items)), dtype=np.float64)

    def __call__(self, u, i):
        return float(self.predict_many([u], [i])[0])

    def __repr__(self):
        return f'<Predictor {self.name}>'


def factor_predictor(name, model, r_max):
    return Predictor(name, lambda users, items: clamp_predictions(model.dots(users, items), r_max))


def zeroshot_predictor(name, model, r_max, eps_floor=1e-6):
    def predict(users, items):
        return clamp_predictions(r_max * zeroshot_ratios(model, users, items, eps_floor), r_max)

    return Predictor(name, predict)


def itemcf_predictor(train, cfg=CfConfig(), name='itemcf'):
    sims = item_similarities(train, cfg.similarity_kind)
    index = UserRatings(train)

    def predict(users, items):
        predictions = np.empty(len(users), dtype=np.float64)
        for row, (u, i) in enumerate(zip(users.tolist(), items.tolist())):
            rated_items, ratings = index.of(u)
            raw = neighbourhood_average(rated_items, ratings, sims.scores[i], cfg.neighborhood_size)
            predictions[row] = index.global_mean if raw is None else raw
        return clamp_predictions(predictions, train.r_max)

    return Predictor(name, predict)


def mae(predictor, test):
    """Mean absolute error over the observed test cells.

    Residuals are summed with exact rounding, so the result does not depend
    on the order of the test rows.
    """
    if len(test) == 0:
        raise ValidationError('MAE of an empty test set')
    predictions = predictor.predict_many(test.users, test.items)
    return math.fsum(np.abs(predictions - test.values).tolist()) / len(test)


def random_baseline_mae(test, seed):
    """MAE of uniform integer guesses in [1, r_max], drawn in canonical cell order."""
    if len(test) == 0:
        raise ValidationError('MAE of an empty test set')
    ordered = test.sorted()
    guesses = np.random.default_rng(seed).integers(1, test.r_max + 1, size=len(ordered))
    return math.fsum(np.abs(guesses - ordered.values).tolist()) / len(ordered)


@dataclass(frozen=True)
class AlgorithmSettings:
    """Everything an algorithm run needs besides the data.

    ``overrides`` maps an algorithm name to TrainConfig fields replacing the
    base ``train`` values. A ``<algo>-hybrid`` run trains its MF stage with
    its own entry and its zero-shot stage with the ``<algo>`` entry.
    """

    train: TrainConfig = TrainConfig()
    overrides: Mapping[str, Mapping] = field(default_factory=dict)
    cf: CfConfig = CfConfig()
    fill_fraction: float = 1.0
    sigma_u: float = 1.0
    sigma_v: float = 1.0

    def train_config(self, name, seed, n_train):
        cfg = replace(self.train, **dict(self.overrides.get(name, {})), seed=seed)
        if cfg.samples_per_epoch is None:
            cfg = cfg.with_samples(n_train)
        return cfg


def build_predictor(name, train, settings, seed, contexts=None):
    if name not in ALGORITHM_NAMES or name == RANDOM:
        raise ValidationError(f'unknown algorithm {name!r}')
    cfg = settings.train_config(name, seed, len(train))
    if name == 'itemcf':
        return itemcf_predictor(train, settings.cf)
    if name == 'mf':
        return factor_predictor(name, mf_train(train, cfg), train.r_max)
    if name == 'powermat':
        if not contexts:
            raise ContextRequiredError('context required: powermat needs a dataset with context columns')
        model = powermat_train(contexts, cfg, settings.sigma_u, settings.sigma_v,
                               n_users=train.n_users, n_items=train.n_items)
        return zeroshot_predictor(name, model.factors, train.r_max, cfg.eps_floor)
    if name.endswith('-hybrid'):
        algo = ZeroShotAlgo(name[:-len('-hybrid')])
        zero_cfg = settings.train_config(algo.value, seed, len(train))
        model = hybrid_train(train, algo, cfg, settings.fill_fraction, zero_cfg=zero_cfg)
        return factor_predictor(name, model, train.r_max)
    model = train_zero_shot(name, train.n_users, train.n_items, cfg)
    return zeroshot_predictor(name, model, train.r_max, cfg.eps_floor)


def _evaluate(name, train, test, settings, seed, contexts):
    if name == RANDOM:
        score = random_baseline_mae(test, seed)
    else:
        score = mae(build_predictor(name, train, settings, seed, contexts), test)
    logger.info('seed %d: %s MAE %.4f', seed, name, score)
    return EvalEntry(name, score, len(test))


def compare(train, test, algorithms, settings=AlgorithmSettings(), *, test_fraction, seed,
            contexts=None, threads=1, duplicates_dropped=0):
    """Score every requested algorithm on one split; the random baseline is always included."""
    names = list(dict.fromkeys(algorithms))
    if RANDOM not in names:
        names.append(RANDOM)
    unknown = [name for name in names if name not in ALGORITHM_NAMES]
    if unknown:
        raise ValidationError(f'unknown algorithm(s): {", ".join(unknown)}')
    if 'powermat' in names and not contexts:
        raise ContextRequiredError('context required: powermat needs a dataset with context columns')

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = [pool.submit(_evaluate, name, train, test, settings, seed, contexts) for name in names]
        entries = [future.result() for future in futures]

    return EvalReport(
        entries=entries,
        split_ratio=test_fraction,
        seed=seed,
        n_train=len(train),
        n_test=len(test),
        duplicates_dropped=duplicates_dropped,
    )
