"""Zipf checks and the global-diversity counts, all in natural-log space."""
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError
from scipy import special, stats


@dataclass(frozen=True)
class RatingHistogram:
    counts: dict

    @property
    def total(self):
        return sum(self.counts.values())

    def points(self):
        return [(value, count) for value, count in self.counts.items() if count > 0]


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    log_intercept: float
    r_squared: float

    @property
    def zipf_exponent(self):
        # rank-frequency curves fall, so the Zipf exponent is the negated slope
        return -self.exponent


@dataclass(frozen=True)
class DiversityInput:
    groups: tuple
    N: int

    def __post_init__(self):
        groups = tuple((int(k), int(m)) for k, m in self.groups)
        object.__setattr__(self, 'groups', groups)
        if not groups:
            raise ValidationError('at least one group is required')
        if self.N < 1:
            raise ValidationError('N must be >= 1')
        for k, m in groups:
            if k < 1 or m < 0:
                raise ValidationError(f'invalid group (K={k}, M={m}): need K >= 1 and M >= 0')

    @property
    def W(self):
        return len(self.groups)


def rating_histogram(dataset):
    if len(dataset) == 0:
        raise ValidationError('histogram of an empty dataset')
    counts = pd.Series(dataset.values).value_counts().sort_index()
    return RatingHistogram({int(value): int(count) for value, count in counts.items()})


def fit_power_law(points):
    """Ordinary least squares of ln y on ln x."""
    points = list(points)
    if len(points) < 2:
        raise ValidationError('a power-law fit needs at least 2 points')
    xs = np.array([x for x, _ in points], dtype=np.float64)
    ys = np.array([y for _, y in points], dtype=np.float64)
    if (xs <= 0).any() or (ys <= 0).any():
        raise ValidationError('power-law fit coordinates must be strictly positive')
    if np.unique(xs).size < 2:
        raise ValidationError('a power-law fit needs at least 2 distinct x values')
    result = stats.linregress(np.log(xs), np.log(ys))
    r_squared = min(max(float(result.rvalue) ** 2, 0.0), 1.0)
    return PowerLawFit(float(result.slope), float(result.intercept), r_squared)


def item_popularity_fit(dataset):
    """Power-law fit of the item rank-frequency curve (items with no rating left out)."""
    counts = np.bincount(dataset.items, minlength=dataset.n_items)
    counts = np.sort(counts[counts > 0])[::-1]
    return fit_power_law(zip(range(1, counts.size + 1), counts.tolist()))


def _log_terms(data):
    log_n = math.log(data.N)
    return np.array([math.log(k) + m * log_n for k, m in data.groups])


def diversity_ordered(data):
    """ln sum_i K_i * N^M_i."""
    return float(special.logsumexp(_log_terms(data)))


def diversity_order_invariant(data, divisor='N'):
    """ln sum_i K_i * N^M_i / N!, or with each term over M_i! when ``divisor='M'``."""
    if divisor == 'N':
        terms = _log_terms(data) - special.gammaln(data.N + 1)
    elif divisor == 'M':
        terms = _log_terms(data) - special.gammaln(np.array([m for _, m in data.groups]) + 1.0)
    else:
        raise ValidationError(f"divisor must be 'N' or 'M', got {divisor!r}")
    return float(special.logsumexp(terms))
