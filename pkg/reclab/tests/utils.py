import numpy as np

from reclab.models import RatingsDataset


def make_dataset(cells, n_users=None, n_items=None, r_max=5):
    """Dataset from (user, item, value) triples; the grid defaults to the smallest one that fits."""
    cells = list(cells)
    users = [u for u, _, _ in cells]
    items = [i for _, i, _ in cells]
    return RatingsDataset(
        users=users,
        items=items,
        values=[v for _, _, v in cells],
        n_users=n_users if n_users is not None else max(users, default=-1) + 1,
        n_items=n_items if n_items is not None else max(items, default=-1) + 1,
        r_max=r_max,
    )


def full_grid(n_users, n_items, values):
    users, items = np.divmod(np.arange(n_users * n_items), n_items)
    return RatingsDataset(users=users, items=items, values=values,
                          n_users=n_users, n_items=n_items, r_max=5)


def shuffled(dataset, seed=123):
    return dataset.take(np.random.default_rng(seed).permutation(len(dataset)))
