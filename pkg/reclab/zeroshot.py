"""Data-free trainers: ZeroMat, DotMat, PoissonMat and the context-aware PowerMat.

None of the context-free trainers takes a rating value as input; their
models are a function of the grid shape and the TrainConfig alone. PowerMat
reads (user, item, context) from each sample and never its rating.
"""
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from django.core.exceptions import ValidationError

from .baselines import check_finite, initial_factors, mf_train
from .models import FactorModel, PowerMatModel, RatingsDataset, clamp_prediction, clamp_predictions

logger = logging.getLogger(__name__)


class ZeroShotAlgo(enum.Enum):
    ZEROMAT = 'zeromat'
    DOTMAT = 'dotmat'
    POISSONMAT = 'poissonmat'


@dataclass
class TrainStats:
    """Counters filled in while a trainer runs."""

    updates: int = 0
    clamp_activations: int = 0
    smallest_argument: float = math.inf

    def floor(self, p, eps_floor):
        if p < eps_floor:
            self.clamp_activations += 1
            p = eps_floor
        if p < self.smallest_argument:
            self.smallest_argument = p
        self.updates += 1
        return p


def zeromat_step(u_row, v_row, gamma, eps_floor, stats=None):
    p = float(u_row @ v_row)
    p = (stats or TrainStats()).floor(p, eps_floor)
    return (
        u_row + gamma * (v_row / p - 2.0 * u_row),
        v_row + gamma * (u_row / p - 2.0 * v_row),
    )


def dotmat_step(u_row, v_row, gamma, eps_floor, p_max, stats=None):
    p = min(float(u_row @ v_row), p_max)
    p = (stats or TrainStats()).floor(p, eps_floor)
    power = p ** p
    coefficient = power * float(np.sign(power - p)) * (1.0 + math.log(p))
    return (
        u_row - gamma * coefficient * v_row,
        v_row - gamma * coefficient * u_row,
    )


def dotmat_full_step(u_row, v_row, rating, r_max, gamma, eps_floor, p_max):
    """DotMat rule with the R_ij / R_max target; it reads a rating, so no trainer uses it."""
    p = max(min(float(u_row @ v_row), p_max), eps_floor)
    power = p ** p
    coefficient = power * float(np.sign(power - rating / r_max)) * (1.0 + math.log(p))
    return (
        u_row - gamma * coefficient * v_row,
        v_row - gamma * coefficient * u_row,
    )


def poissonmat_coefficient(p):
    return (p + 1.0) / p + math.log(p) - 1.0


def poissonmat_step(u_row, v_row, gamma, eps_floor, stats=None):
    p = float(u_row @ v_row)
    p = (stats or TrainStats()).floor(p, eps_floor)
    coefficient = poissonmat_coefficient(p)
    return (
        u_row - gamma * coefficient * v_row,
        v_row - gamma * coefficient * u_row,
    )


def powermat_step(u_row, v_row, alpha, beta, context, gamma, sigma_u, sigma_v, eps_floor, stats=None):
    p = float(u_row @ v_row)
    p = (stats or TrainStats()).floor(p, eps_floor)
    s = float(alpha @ context)
    return (
        u_row - gamma * (beta * p * v_row + (beta * p + s) * v_row - (2.0 / sigma_u) * u_row),
        v_row - gamma * (beta * p * u_row + (beta * p + s) * u_row - (2.0 / sigma_v) * v_row),
        alpha - gamma * p * context,
        beta - gamma * p * p,
    )


def _sampled_training(name, n_users, n_items, cfg, step, stats):
    if n_users < 1 or n_items < 1:
        raise ValidationError(f'{name} needs n_users >= 1 and n_items >= 1')
    if cfg.samples_per_epoch is None:
        raise ValidationError({'samples_per_epoch': f'{name} needs samples_per_epoch'})
    stats = stats if stats is not None else TrainStats()
    rng = np.random.default_rng(cfg.seed)
    U = initial_factors(rng, n_users, cfg)
    V = initial_factors(rng, n_items, cfg)

    with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
        for epoch in range(1, cfg.epochs + 1):
            users = rng.integers(0, n_users, size=cfg.samples_per_epoch).tolist()
            items = rng.integers(0, n_items, size=cfg.samples_per_epoch).tolist()
            for u, j in zip(users, items):
                U[u], V[j] = step(U[u], V[j], stats)
            check_finite(name, epoch, U, V)
            logger.debug('%s epoch %d done, %d clamps so far', name, epoch, stats.clamp_activations)

    logger.info('%s trained on a %d x %d grid, %d epochs, %d clamp activations',
                name, n_users, n_items, cfg.epochs, stats.clamp_activations)
    return FactorModel(U, V)


def zeromat_train(n_users, n_items, cfg, stats=None):
    def step(u_row, v_row, counters):
        return zeromat_step(u_row, v_row, cfg.gamma, cfg.eps_floor, counters)

    return _sampled_training('zeromat', n_users, n_items, cfg, step, stats)


def dotmat_train(n_users, n_items, cfg, stats=None):
    def step(u_row, v_row, counters):
        return dotmat_step(u_row, v_row, cfg.gamma, cfg.eps_floor, cfg.p_max, counters)

    return _sampled_training('dotmat', n_users, n_items, cfg, step, stats)


def poissonmat_train(n_users, n_items, cfg, stats=None):
    def step(u_row, v_row, counters):
        return poissonmat_step(u_row, v_row, cfg.gamma, cfg.eps_floor, counters)

    return _sampled_training('poissonmat', n_users, n_items, cfg, step, stats)


TRAINERS = {
    ZeroShotAlgo.ZEROMAT: zeromat_train,
    ZeroShotAlgo.DOTMAT: dotmat_train,
    ZeroShotAlgo.POISSONMAT: poissonmat_train,
}


def train_zero_shot(algo, n_users, n_items, cfg, stats=None):
    return TRAINERS[ZeroShotAlgo(algo)](n_users, n_items, cfg, stats)


def powermat_train(contexts, cfg, sigma_u=1.0, sigma_v=1.0, n_users=None, n_items=None, stats=None):
    """Context-aware data-free training over (user, item, context) samples.

    Samples are visited in a seed-derived shuffle of their canonical
    (user, item, context) order; the rating carried by each sample is never read.
    """
    if not contexts:
        raise ValidationError('powermat needs at least one context sample')
    dims = {len(sample.context) for sample in contexts}
    if len(dims) != 1:
        raise ValidationError(f'context dimension mismatch: found dimensions {sorted(dims)}')
    d_c = dims.pop()
    if d_c < 1:
        raise ValidationError('context vectors must have dimension >= 1')
    if sigma_u <= 0 or sigma_v <= 0:
        raise ValidationError('sigma_u and sigma_v must be positive')

    samples = sorted((s.user_id, s.item_id, tuple(s.context)) for s in contexts)
    n_users = n_users if n_users is not None else max(s[0] for s in samples) + 1
    n_items = n_items if n_items is not None else max(s[1] for s in samples) + 1
    if samples[-1][0] >= n_users or max(s[1] for s in samples) >= n_items:
        raise ValidationError('context sample outside the user/item grid')
    users = [s[0] for s in samples]
    items = [s[1] for s in samples]
    context_rows = np.array([s[2] for s in samples], dtype=np.float64)

    stats = stats if stats is not None else TrainStats()
    rng = np.random.default_rng(cfg.seed)
    U = initial_factors(rng, n_users, cfg)
    V = initial_factors(rng, n_items, cfg)
    alpha = cfg.init_lo * rng.uniform(0.5, 1.0, size=d_c)
    beta = cfg.init_lo

    with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
        for epoch in range(1, cfg.epochs + 1):
            for idx in rng.permutation(len(samples)).tolist():
                u, j = users[idx], items[idx]
                U[u], V[j], alpha, beta = powermat_step(
                    U[u], V[j], alpha, beta, context_rows[idx],
                    cfg.gamma, sigma_u, sigma_v, cfg.eps_floor, stats,
                )
            check_finite('powermat', epoch, U, V, alpha, np.array([beta]))

    logger.info('powermat trained on %d context samples (d_c=%d), %d clamp activations',
                len(samples), d_c, stats.clamp_activations)
    return PowerMatModel(FactorModel(U, V), alpha, beta, sigma_u, sigma_v)


def zeroshot_ratios(model, users, items, eps_floor=1e-6):
    maxima = np.maximum(model.row_maxima[users], eps_floor)
    return model.dots(users, items) / maxima


def zeroshot_predict(model, u, i, r_max, eps_floor=1e-6):
    """r_max * (U_u.V_i) / max_j(U_u.V_j), clamped to the rating scale."""
    maximum = max(float(model.row_maxima[u]), eps_floor)
    return clamp_prediction(r_max * (model.dot(u, i) / maximum), r_max)


def _unobserved_cells(rng, train, n_fill):
    total = train.n_users * train.n_items
    if n_fill > total - len(train):
        raise ValidationError(f'cannot fill {n_fill} cells, only {total - len(train)} are unobserved')
    if n_fill == total - len(train):
        keys = np.setdiff1d(np.arange(total, dtype=np.int64), train.cell_keys())
        return keys // train.n_items, keys % train.n_items
    observed = set(train.cell_keys().tolist())
    chosen = {}
    while len(chosen) < n_fill:
        for key in rng.integers(0, total, size=2 * (n_fill - len(chosen)) + 16).tolist():
            if key not in observed and key not in chosen:
                chosen[key] = None
                if len(chosen) == n_fill:
                    break
    keys = np.fromiter(chosen, dtype=np.int64, count=n_fill)
    return keys // train.n_items, keys % train.n_items


def hybrid_train(train, algo, cfg, fill_fraction=1.0, eps_floor=None, zero_cfg=None):
    """Densify ``train`` with rounded zero-shot predictions, then fit plain MF.

    ``cfg`` drives the MF stage; the zero-shot stage uses ``zero_cfg`` when
    given and ``cfg`` otherwise.
    """
    if len(train) == 0:
        raise ValidationError('hybrid_train needs a non-empty training set')
    if not 0 < fill_fraction <= 1:
        raise ValidationError({'fill_fraction': 'must lie in (0, 1]'})
    algo = ZeroShotAlgo(algo)
    zero_cfg = zero_cfg or cfg
    if zero_cfg.samples_per_epoch is None:
        zero_cfg = zero_cfg.with_samples(len(train))
    zero_model = train_zero_shot(algo, train.n_users, train.n_items, zero_cfg)

    n_fill = int(round(fill_fraction * len(train)))
    unobserved = train.n_users * train.n_items - len(train)
    if n_fill > unobserved:
        logger.info('%s hybrid: only %d unobserved cells, filling all of them', algo.value, unobserved)
        n_fill = unobserved
    rng = np.random.default_rng([cfg.seed, 1])
    fill_users, fill_items = _unobserved_cells(rng, train, n_fill)
    ratios = zeroshot_ratios(zero_model, fill_users, fill_items, eps_floor or zero_cfg.eps_floor)
    fill_values = np.rint(clamp_predictions(train.r_max * ratios, train.r_max)).astype(np.int64)

    augmented = RatingsDataset(
        users=np.concatenate([train.users, fill_users]),
        items=np.concatenate([train.items, fill_items]),
        values=np.concatenate([train.values, fill_values]),
        n_users=train.n_users,
        n_items=train.n_items,
        r_max=train.r_max,
    )
    logger.info('%s hybrid: %d observed + %d filled cells', algo.value, len(train), n_fill)
    return mf_train(augmented, cfg)
