import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from django.core.exceptions import ValidationError

from .exceptions import TrainingError
from .models import FactorModel, clamp_prediction

logger = logging.getLogger(__name__)


class SimilarityKind(enum.Enum):
    COSINE = 'cosine'
    ADJUSTED_COSINE = 'adjusted_cosine'


@dataclass(frozen=True)
class CfConfig:
    neighborhood_size: int = 30
    similarity_kind: SimilarityKind = SimilarityKind.COSINE

    def __post_init__(self):
        if self.neighborhood_size < 1:
            raise ValidationError({'neighborhood_size': 'must be >= 1'})
        if isinstance(self.similarity_kind, str):
            object.__setattr__(self, 'similarity_kind', SimilarityKind(self.similarity_kind))


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    scores: np.ndarray
    kind: SimilarityKind = SimilarityKind.COSINE

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        if scores.ndim != 2 or scores.shape[0] != scores.shape[1]:
            raise ValidationError('similarity scores must be a square matrix')
        scores.setflags(write=False)
        object.__setattr__(self, 'scores', scores)

    @property
    def n_items(self):
        return int(self.scores.shape[0])

    def __getitem__(self, pair):
        return float(self.scores[pair])


class UserRatings:
    """Row index over a training set: the items and ratings of each user, item-sorted."""

    def __init__(self, train):
        ordered = train.sorted()
        self.indptr = np.searchsorted(ordered.users, np.arange(train.n_users + 1))
        self.items = ordered.items
        self.values = ordered.values.astype(np.float64)
        self.global_mean = train.global_mean()
        self.r_max = train.r_max

    def of(self, u):
        start, end = self.indptr[u], self.indptr[u + 1]
        return self.items[start:end], self.values[start:end]


def item_similarities(train, kind=SimilarityKind.COSINE):
    """Item-item cosine (or adjusted cosine) over co-rating users.

    Norms are taken over the users who rated both items, so
    ``s[i][j] = sum_u r_ui r_uj / sqrt(sum_u r_ui^2 * sum_u r_uj^2)``
    with every sum restricted to co-raters. Pairs without co-raters score 0.
    """
    kind = SimilarityKind(kind)
    if len(train) == 0:
        raise ValidationError('item similarities need a non-empty training set')
    ordered = train.sorted()
    values = ordered.values.astype(np.float64)
    if kind is SimilarityKind.ADJUSTED_COSINE:
        totals = np.bincount(ordered.users, weights=values, minlength=train.n_users)
        counts = np.bincount(ordered.users, minlength=train.n_users)
        values = values - (totals / np.maximum(counts, 1))[ordered.users]

    shape = (train.n_users, train.n_items)
    ratings = sp.csr_matrix((values, (ordered.users, ordered.items)), shape=shape)
    rated = sp.csr_matrix((np.ones(len(ordered)), (ordered.users, ordered.items)), shape=shape)

    products = (ratings.T @ ratings).toarray()
    # norms[i, j]: squared norm of item i over the users who also rated j
    norms = (ratings.multiply(ratings).T @ rated).toarray()
    denominator = np.sqrt(norms * norms.T)
    scores = np.divide(products, denominator, out=np.zeros_like(products), where=denominator > 0)
    scores = np.clip((scores + scores.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(scores, 0.0)
    logger.info('computed %s similarities for %d items', kind.value, train.n_items)
    return SimilarityMatrix(scores, kind)


def neighbourhood_average(items, ratings, scores_row, neighborhood_size):
    """Similarity-weighted average over the top neighbours, or None without any."""
    similarities = scores_row[items]
    keep = np.abs(similarities) > 0
    similarities, ratings = similarities[keep], ratings[keep]
    if similarities.size == 0:
        return None
    top = np.argsort(-similarities, kind='stable')[:neighborhood_size]
    similarities, ratings = similarities[top], ratings[top]
    return float(np.dot(similarities, ratings) / np.abs(similarities).sum())


def cf_predict(u, i, sims, train, cfg=CfConfig(), index=None):
    index = index or UserRatings(train)
    items, ratings = index.of(u)
    raw = neighbourhood_average(items, ratings, sims.scores[i], cfg.neighborhood_size)
    if raw is None:
        return index.global_mean
    return clamp_prediction(raw, train.r_max)


def initial_factors(rng, n_rows, cfg):
    return rng.uniform(cfg.init_lo, cfg.init_hi, size=(n_rows, cfg.k)) / math.sqrt(cfg.k)


def check_finite(algorithm, epoch, *arrays):
    for array in arrays:
        if not np.isfinite(array).all():
            raise TrainingError(algorithm, epoch)


def mf_loss(model, train):
    errors = train.values - model.dots(train.users, train.items)
    return float(np.dot(errors, errors))


def mf_gradient(model, train):
    """Analytic gradient of the squared loss with respect to U and V."""
    errors = train.values - model.dots(train.users, train.items)
    grad_u = np.zeros_like(model.U)
    grad_v = np.zeros_like(model.V)
    np.add.at(grad_u, train.users, -2.0 * errors[:, None] * model.V[train.items])
    np.add.at(grad_v, train.items, -2.0 * errors[:, None] * model.U[train.users])
    return grad_u, grad_v


def mf_train(train, cfg, on_epoch=None):
    """Plain SGD on sum (R_ij - U_i.V_j)^2, no biases and no regularization.

    Ratings are visited in a seed-derived shuffle of their canonical
    (user, item) order, so the input row order never matters.
    """
    if len(train) == 0:
        raise ValidationError('mf_train needs a non-empty training set')
    rng = np.random.default_rng(cfg.seed)
    U = initial_factors(rng, train.n_users, cfg)
    V = initial_factors(rng, train.n_items, cfg)

    ordered = train.sorted()
    users = ordered.users.tolist()
    items = ordered.items.tolist()
    values = ordered.values.astype(np.float64).tolist()
    gamma = cfg.gamma

    with np.errstate(over='ignore', invalid='ignore'):
        for epoch in range(1, cfg.epochs + 1):
            for idx in rng.permutation(len(users)).tolist():
                u, j = users[idx], items[idx]
                user_row = U[u].copy()
                item_row = V[j].copy()
                step = gamma * 2.0 * (values[idx] - user_row @ item_row)
                U[u] += step * item_row
                V[j] += step * user_row
            check_finite('mf', epoch, U, V)
            if on_epoch is not None:
                on_epoch(epoch, FactorModel(U, V))
            elif logger.isEnabledFor(logging.DEBUG):
                logger.debug('mf epoch %d loss %.6f', epoch, mf_loss(FactorModel(U, V), ordered))

    logger.info('mf trained: %d ratings, k=%d, %d epochs', len(train), cfg.k, cfg.epochs)
    return FactorModel(U, V)


def mf_predict(model, u, i, r_max):
    return clamp_prediction(model.dot(u, i), r_max)
