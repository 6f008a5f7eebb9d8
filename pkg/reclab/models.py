from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, NamedTuple, Optional

import numpy as np
from django.core.exceptions import ValidationError

SEED_MAX = 2 ** 64 - 1


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


def sequential_dot(left, right):
    """Row-wise dot product over the last axis, summed in a fixed column order.

    Every prediction path goes through this so that a scalar dot product and
    the same entry of a block product agree to the last bit.
    """
    total = left[..., 0] * right[..., 0]
    for column in range(1, left.shape[-1]):
        total = total + left[..., column] * right[..., column]
    return total


def clamp_prediction(raw, r_max):
    if r_max < 1:
        raise ValidationError(f'r_max must be >= 1, got {r_max}')
    return float(min(max(raw, 1.0), float(r_max)))


def clamp_predictions(raw, r_max):
    return np.clip(np.asarray(raw, dtype=np.float64), 1.0, float(r_max))


class Rating(NamedTuple):
    user_id: int
    item_id: int
    value: int
    timestamp: Optional[int] = None


class ContextSample(NamedTuple):
    user_id: int
    item_id: int
    value: int
    context: tuple


@dataclass(frozen=True, eq=False)
class RatingsDataset:
    """Sparse user-item-rating triples on a 1..r_max integer scale.

    Columns are stored as read-only numpy arrays; ``ratings`` gives the
    row view. Timestamps are carried along for round-tripping files and are
    never read by any algorithm.
    """

    users: np.ndarray
    items: np.ndarray
    values: np.ndarray
    n_users: int
    n_items: int
    r_max: int
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'users', _frozen(self.users, np.int64))
        object.__setattr__(self, 'items', _frozen(self.items, np.int64))
        object.__setattr__(self, 'values', _frozen(self.values, np.int64))
        if self.timestamps is not None:
            object.__setattr__(self, 'timestamps', _frozen(self.timestamps, np.int64))
        self._validate()

    def _validate(self):
        n = self.users.shape[0]
        if self.users.ndim != 1 or self.items.shape != (n,) or self.values.shape != (n,):
            raise ValidationError('users, items and values must be 1-d arrays of equal length')
        if self.timestamps is not None and self.timestamps.shape != (n,):
            raise ValidationError('timestamps must match the number of ratings')
        if self.n_users < 0 or self.n_items < 0:
            raise ValidationError('n_users and n_items must be non-negative')
        if self.r_max < 1:
            raise ValidationError(f'r_max must be >= 1, got {self.r_max}')
        if n == 0:
            return
        if self.users.min() < 0 or self.users.max() >= self.n_users:
            raise ValidationError(f'user index out of range [0, {self.n_users})')
        if self.items.min() < 0 or self.items.max() >= self.n_items:
            raise ValidationError(f'item index out of range [0, {self.n_items})')
        if self.values.min() < 1 or self.values.max() > self.r_max:
            raise ValidationError(f'rating value out of range [1, {self.r_max}]')
        if np.unique(self.cell_keys()).shape[0] != n:
            raise ValidationError('duplicate (user, item) pair')

    @classmethod
    def from_ratings(cls, ratings: Iterable[Rating], n_users, n_items, r_max):
        ratings = list(ratings)
        timestamps = None
        if ratings and all(r.timestamp is not None for r in ratings):
            timestamps = [r.timestamp for r in ratings]
        return cls(
            users=[r.user_id for r in ratings],
            items=[r.item_id for r in ratings],
            values=[r.value for r in ratings],
            n_users=n_users,
            n_items=n_items,
            r_max=r_max,
            timestamps=timestamps,
        )

    def __len__(self):
        return int(self.users.shape[0])

    @property
    def ratings(self):
        stamps = self.timestamps if self.timestamps is not None else [None] * len(self)
        return tuple(
            Rating(int(u), int(i), int(v), None if t is None else int(t))
            for u, i, v, t in zip(self.users, self.items, self.values, stamps)
        )

    def cell_keys(self):
        return self.users * self.n_items + self.items

    def canonical_order(self):
        return np.lexsort((self.items, self.users))

    def take(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return RatingsDataset(
            users=self.users[indices],
            items=self.items[indices],
            values=self.values[indices],
            n_users=self.n_users,
            n_items=self.n_items,
            r_max=self.r_max,
            timestamps=None if self.timestamps is None else self.timestamps[indices],
        )

    def sorted(self):
        return self.take(self.canonical_order())

    def with_values(self, values):
        return replace(self, values=values)

    def global_mean(self):
        if len(self) == 0:
            raise ValidationError('global mean of an empty dataset')
        return float(self.values.sum()) / len(self)


@dataclass(frozen=True, eq=False)
class FactorModel:
    """Latent user factors ``U`` (n_users x k) and item factors ``V`` (n_items x k)."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'U', _frozen(self.U, np.float64))
        object.__setattr__(self, 'V', _frozen(self.V, np.float64))
        if self.U.ndim != 2 or self.V.ndim != 2:
            raise ValidationError('U and V must be 2-d matrices')
        if self.U.shape[1] != self.V.shape[1]:
            raise ValidationError('U and V rows must share the latent dimension k')
        if self.U.shape[1] < 1:
            raise ValidationError('latent dimension k must be >= 1')

    @property
    def k(self):
        return int(self.U.shape[1])

    @property
    def n_users(self):
        return int(self.U.shape[0])

    @property
    def n_items(self):
        return int(self.V.shape[0])

    def dot(self, u, i):
        return float(sequential_dot(self.U[u], self.V[i]))

    def dots(self, users, items):
        return sequential_dot(self.U[users], self.V[items])

    @cached_property
    def row_maxima(self):
        """max_j U_u . V_j for every user, computed once per model."""
        maxima = np.empty(self.n_users, dtype=np.float64)
        step = max(1, 2 ** 22 // max(1, self.n_items))
        for start in range(0, self.n_users, step):
            block = sequential_dot(self.U[start:start + step, None, :], self.V[None, :, :])
            maxima[start:start + step] = block.max(axis=1)
        maxima.setflags(write=False)
        return maxima

    def same_as(self, other):
        return np.array_equal(self.U, other.U) and np.array_equal(self.V, other.V)


@dataclass(frozen=True, eq=False)
class PowerMatModel:
    factors: FactorModel
    alpha: np.ndarray
    beta: float
    sigma_u: float = 1.0
    sigma_v: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'alpha', _frozen(self.alpha, np.float64))
        object.__setattr__(self, 'beta', float(self.beta))
        if self.alpha.ndim != 1 or self.alpha.shape[0] < 1:
            raise ValidationError('alpha must be a non-empty vector')
        if self.sigma_u <= 0 or self.sigma_v <= 0:
            raise ValidationError('sigma_u and sigma_v must be positive')

    @property
    def context_dim(self):
        return int(self.alpha.shape[0])

    def same_as(self, other):
        return (
            self.factors.same_as(other.factors)
            and np.array_equal(self.alpha, other.alpha)
            and self.beta == other.beta
        )


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.005
    k: int = 10
    epochs: int = 30
    seed: int = 0
    eps_floor: float = 1e-6
    init_lo: float = 0.1
    init_hi: float = 0.9
    samples_per_epoch: Optional[int] = None
    p_max: float = 10.0

    def __post_init__(self):
        errors = {}
        if not self.gamma >= 0:
            errors['gamma'] = 'must be >= 0'
        if self.k < 1:
            errors['k'] = 'must be >= 1'
        if self.epochs < 1:
            errors['epochs'] = 'must be >= 1'
        if not 0 <= self.seed <= SEED_MAX:
            errors['seed'] = 'must be a 64-bit unsigned integer'
        if not self.eps_floor > 0:
            errors['eps_floor'] = 'must be > 0'
        if not 0 < self.init_lo < self.init_hi:
            errors['init_lo'] = 'must satisfy 0 < init_lo < init_hi'
        if self.samples_per_epoch is not None and self.samples_per_epoch < 1:
            errors['samples_per_epoch'] = 'must be >= 1'
        if not self.p_max > self.eps_floor:
            errors['p_max'] = 'must be greater than eps_floor'
        if errors:
            raise ValidationError(errors)

    def with_samples(self, samples_per_epoch):
        return replace(self, samples_per_epoch=samples_per_epoch)

    def with_seed(self, seed):
        return replace(self, seed=seed)


@dataclass(frozen=True)
class EvalEntry:
    algorithm: str
    mae: float
    n_test_predictions: int

    def __post_init__(self):
        if not self.mae >= 0:
            raise ValidationError(f'{self.algorithm}: mae must be >= 0, got {self.mae}')


@dataclass(frozen=True)
class EvalReport:
    entries: tuple
    split_ratio: float
    seed: int
    n_train: int = 0
    n_test: int = 0
    duplicates_dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'entries', tuple(self.entries))
        if not 0 < self.split_ratio < 1:
            raise ValidationError('split_ratio must lie in (0, 1)')

    def mae_of(self, algorithm):
        for entry in self.entries:
            if entry.algorithm == algorithm:
                return entry.mae
        raise KeyError(algorithm)
