import enum
import io
import logging
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError

from .exceptions import DatasetParseError, SchemaError
from .models import ContextSample, RatingsDataset

logger = logging.getLogger(__name__)

MOVIELENS_R_MAX = 5
COMODA_MISSING_MARKER = -1
DEFAULT_CONTEXT_COLUMNS = ('mood', 'location')


class MovieLensFormat(enum.Enum):
    TAB_100K = '\t'
    COLONS_1M = '::'

    @property
    def separator(self):
        return self.value


@dataclass(frozen=True, eq=False)
class MovieLensFile:
    dataset: RatingsDataset
    user_ids: np.ndarray
    item_ids: np.ndarray
    duplicates_dropped: int = 0


@dataclass(frozen=True, eq=False)
class ComodaFile:
    dataset: RatingsDataset
    contexts: list
    user_ids: np.ndarray
    item_ids: np.ndarray
    duplicates_dropped: int = 0


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValidationError({'test_fraction': f'must lie in (0, 1), got {self.test_fraction}'})


def _read_text(source):
    if isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    else:
        raw = source.read()
        if isinstance(raw, str):
            raw = raw.encode('utf-8')
    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError as exc:
        raise DatasetParseError(f'input is not valid UTF-8 ({exc.reason})') from exc
    if text.startswith('\ufeff'):
        text = text[1:]
    # CR/LF and lone CR become LF.
    return io.StringIO(text, newline=None).read()


def _integer_column(frame, column, line_numbers, label):
    numbers = pd.to_numeric(frame[column].str.strip(), errors='coerce')
    bad = numbers.isna() | (numbers % 1 != 0)
    if bad.any():
        first = bad.to_numpy().nonzero()[0][0]
        raise DatasetParseError(
            f'{label} {frame[column].iloc[first]!r} is not an integer',
            line=int(line_numbers[first]),
        )
    return numbers.astype(np.int64).to_numpy()


def _drop_duplicate_cells(frame, key_columns):
    before = len(frame)
    frame = frame.drop_duplicates(subset=key_columns, keep='last')
    dropped = before - len(frame)
    if dropped:
        logger.warning('dropped %d duplicate (user, item) rows, last occurrence kept', dropped)
    return frame, dropped


def load_movielens(source, fmt=MovieLensFormat.TAB_100K, r_max=MOVIELENS_R_MAX):
    """Parse a MovieLens ratings file into a dataset plus its raw-id tables.

    Raw user and item ids are remapped to dense 0-based indices in ascending
    raw-id order, so the mapping does not depend on the order of the lines.
    """
    fmt = MovieLensFormat[fmt] if isinstance(fmt, str) else fmt
    lines = pd.Series(_read_text(source).split('\n'), dtype=object)
    line_numbers = np.arange(1, len(lines) + 1)

    filled = lines.str.strip() != ''
    lines, line_numbers = lines[filled].reset_index(drop=True), line_numbers[filled.to_numpy()]
    if lines.empty:
        empty = RatingsDataset(users=[], items=[], values=[], n_users=0, n_items=0,
                               r_max=r_max, timestamps=[])
        return MovieLensFile(empty, np.array([], dtype=np.int64), np.array([], dtype=np.int64))

    field_counts = lines.str.count(re.escape(fmt.separator)) + 1
    malformed = (field_counts != 4).to_numpy()
    if malformed.any():
        first = malformed.nonzero()[0][0]
        raise DatasetParseError(
            f'expected 4 fields separated by {fmt.separator!r}, found {int(field_counts.iloc[first])}',
            line=int(line_numbers[first]),
        )

    frame = lines.str.split(fmt.separator, n=3, expand=True, regex=False)
    frame.columns = ['user', 'item', 'rating', 'timestamp']
    raw_users = _integer_column(frame, 'user', line_numbers, 'user id')
    raw_items = _integer_column(frame, 'item', line_numbers, 'item id')
    values = _integer_column(frame, 'rating', line_numbers, 'rating')
    timestamps = _integer_column(frame, 'timestamp', line_numbers, 'timestamp')

    out_of_scale = (values < 1) | (values > r_max)
    if out_of_scale.any():
        first = out_of_scale.nonzero()[0][0]
        raise ValidationError(
            f'line {int(line_numbers[first])}: rating {int(values[first])} '
            f'outside [1, {r_max}]'
        )

    parsed = pd.DataFrame({'user': raw_users, 'item': raw_items, 'rating': values, 'timestamp': timestamps})
    parsed, dropped = _drop_duplicate_cells(parsed, ['user', 'item'])

    user_codes, user_ids = pd.factorize(parsed['user'], sort=True)
    item_codes, item_ids = pd.factorize(parsed['item'], sort=True)
    dataset = RatingsDataset(
        users=user_codes,
        items=item_codes,
        values=parsed['rating'].to_numpy(),
        n_users=len(user_ids),
        n_items=len(item_ids),
        r_max=r_max,
        timestamps=parsed['timestamp'].to_numpy(),
    )
    logger.info('parsed %d ratings (%d users, %d items)', len(dataset), dataset.n_users, dataset.n_items)
    return MovieLensFile(dataset, np.asarray(user_ids, dtype=np.int64), np.asarray(item_ids, dtype=np.int64), dropped)


def parse_movielens(source, fmt=MovieLensFormat.TAB_100K, r_max=MOVIELENS_R_MAX):
    return load_movielens(source, fmt, r_max).dataset


def serialize_movielens(dataset, fmt=MovieLensFormat.TAB_100K, user_ids=None, item_ids=None):
    """Render a dataset as MovieLens lines (UTF-8 bytes, LF line endings)."""
    fmt = MovieLensFormat[fmt] if isinstance(fmt, str) else fmt
    users = dataset.users + 1 if user_ids is None else np.asarray(user_ids)[dataset.users]
    items = dataset.items + 1 if item_ids is None else np.asarray(item_ids)[dataset.items]
    stamps = np.zeros(len(dataset), dtype=np.int64) if dataset.timestamps is None else dataset.timestamps
    frame = pd.DataFrame({'user': users, 'item': items, 'rating': dataset.values, 'timestamp': stamps}).astype(str)
    sep = fmt.separator
    rows = frame['user'] + sep + frame['item'] + sep + frame['rating'] + sep + frame['timestamp']
    return ''.join(row + '\n' for row in rows).encode('utf-8')


def write_movielens(dataset, sink, fmt=MovieLensFormat.TAB_100K, user_ids=None, item_ids=None):
    """Write ``serialize_movielens`` output to a binary stream."""
    sink.write(serialize_movielens(dataset, fmt, user_ids, item_ids))


def load_comoda(source, context_columns=DEFAULT_CONTEXT_COLUMNS, *, user_column='userID',
                item_column='itemID', rating_column='rating', r_max: Optional[int] = None):
    """Parse an LDOS-CoMoDa CSV export.

    Categorical context columns are passed through as their integer codes
    (cast to float). Empty cells and the ``-1`` marker count as missing and
    are encoded as 0.0.
    """
    context_columns = tuple(context_columns)
    if not context_columns:
        raise SchemaError('at least one context column is required')
    try:
        frame = pd.read_csv(io.StringIO(_read_text(source)), dtype=str, keep_default_na=False,
                            skip_blank_lines=True)
    except pd.errors.EmptyDataError as exc:
        raise SchemaError('CoMoDa file has no header row') from exc
    except pd.errors.ParserError as exc:
        raise DatasetParseError(str(exc)) from exc
    frame.columns = [str(column).strip() for column in frame.columns]

    required = (user_column, item_column, rating_column) + context_columns
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise SchemaError(f'missing column(s): {", ".join(missing)}')

    # Header is line 1.
    line_numbers = np.arange(2, len(frame) + 2)
    raw_users = _integer_column(frame, user_column, line_numbers, 'user id')
    raw_items = _integer_column(frame, item_column, line_numbers, 'item id')
    values = _integer_column(frame, rating_column, line_numbers, 'rating')
    if values.size and values.min() < 1:
        first = (values < 1).nonzero()[0][0]
        raise ValidationError(f'line {int(line_numbers[first])}: rating {int(values[first])} below 1')
    if r_max is None:
        r_max = int(values.max()) if values.size else 1

    encoded = []
    for column in context_columns:
        cells = frame[column].str.strip()
        codes = pd.to_numeric(cells, errors='coerce')
        unreadable = (codes.isna() & (cells != '')).to_numpy()
        if unreadable.any():
            first = unreadable.nonzero()[0][0]
            raise DatasetParseError(f'context {column}={cells.iloc[first]!r} is not a code',
                                    line=int(line_numbers[first]))
        codes = codes.fillna(0.0).mask(codes == COMODA_MISSING_MARKER, 0.0)
        encoded.append(codes.astype(np.float64).to_numpy())
    contexts_matrix = np.column_stack(encoded) if encoded else np.zeros((len(frame), 0))

    parsed = pd.DataFrame({'user': raw_users, 'item': raw_items, 'rating': values})
    user_codes, user_ids = pd.factorize(parsed['user'], sort=True)
    item_codes, item_ids = pd.factorize(parsed['item'], sort=True)
    parsed['u'], parsed['i'] = user_codes, item_codes

    deduped, dropped = _drop_duplicate_cells(parsed, ['u', 'i'])
    # RangeIndex labels survive drop_duplicates, so they pick the matching context rows
    kept = deduped.index.to_numpy()
    contexts = [
        ContextSample(int(u), int(i), int(v), tuple(float(x) for x in row))
        for u, i, v, row in zip(deduped['u'], deduped['i'], deduped['rating'], contexts_matrix[kept])
    ]
    dataset = RatingsDataset(
        users=deduped['u'].to_numpy(),
        items=deduped['i'].to_numpy(),
        values=deduped['rating'].to_numpy(),
        n_users=len(user_ids),
        n_items=len(item_ids),
        r_max=r_max,
    )
    logger.info('parsed %d CoMoDa rows with %d context column(s)', len(contexts), len(context_columns))
    return ComodaFile(dataset, contexts, np.asarray(user_ids, dtype=np.int64),
                      np.asarray(item_ids, dtype=np.int64), dropped)


def parse_comoda(source, context_columns=DEFAULT_CONTEXT_COLUMNS, **options):
    """``(dataset, contexts)`` of ``load_comoda``."""
    loaded = load_comoda(source, context_columns, **options)
    return loaded.dataset, loaded.contexts


def context_subset(contexts, dataset):
    """Context samples whose (user, item) cell belongs to ``dataset``."""
    keys = set(dataset.cell_keys().tolist())
    return [c for c in contexts if c.user_id * dataset.n_items + c.item_id in keys]


def split(dataset, spec):
    """Random train/test partition, independent of the dataset's row order."""
    if len(dataset) == 0:
        raise ValidationError('cannot split an empty dataset')
    rng = np.random.default_rng(spec.seed)
    order = dataset.canonical_order()
    permutation = rng.permutation(len(dataset))
    n_test = int(round(spec.test_fraction * len(dataset)))
    test = dataset.take(order[np.sort(permutation[:n_test])])
    train = dataset.take(order[np.sort(permutation[n_test:])])
    return train, test


def _zipf_item_counts(rng, n_users, n_items, n_ratings, exponent):
    weights = np.arange(1, n_items + 1, dtype=np.float64) ** -exponent
    weights /= weights.sum()
    counts = rng.multinomial(n_ratings, weights)
    # An item holds at most n_users ratings; spill the overflow onto open items.
    while True:
        overflow = int(np.maximum(counts - n_users, 0).sum())
        if overflow == 0:
            return counts
        counts = np.minimum(counts, n_users)
        open_weights = np.where(counts < n_users, weights, 0.0)
        counts = counts + rng.multinomial(overflow, open_weights / open_weights.sum())


def generate_zipf(n_users, n_items, n_ratings, exponent=1.0, r_max=MOVIELENS_R_MAX, seed=0):
    """Synthetic ratings with Zipf item popularity and count(v) proportional to v.

    Item ``j`` has popularity rank ``j + 1``. Users are drawn uniformly
    without repeating a cell.
    """
    if n_users < 1 or n_items < 1 or n_ratings < 0:
        raise ValidationError('n_users and n_items must be >= 1 and n_ratings >= 0')
    if n_ratings > n_users * n_items:
        raise ValidationError(
            f'{n_ratings} ratings do not fit a {n_users} x {n_items} grid without duplicate cells'
        )
    if not exponent > 0:
        raise ValidationError('exponent must be > 0')
    if r_max < 1:
        raise ValidationError('r_max must be >= 1')

    rng = np.random.default_rng(seed)
    counts = _zipf_item_counts(rng, n_users, n_items, n_ratings, exponent)
    items = np.repeat(np.arange(n_items, dtype=np.int64), counts)
    users = np.concatenate(
        [rng.choice(n_users, size=int(count), replace=False) for count in counts]
    ).astype(np.int64) if n_ratings else np.array([], dtype=np.int64)

    scale = np.arange(1, r_max + 1)
    values = rng.choice(scale, size=n_ratings, p=scale / scale.sum())

    order = rng.permutation(n_ratings)
    return RatingsDataset(
        users=users[order],
        items=items[order],
        values=values[order],
        n_users=n_users,
        n_items=n_items,
        r_max=r_max,
    )
