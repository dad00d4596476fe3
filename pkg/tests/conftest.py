import numpy as np
import pytest

from capsvm import Dataset, build_stack, kernels, penalty_vector


def random_instance(seed, m_range=(10, 51), p_range=(1, 4), lam_range=(-3, 0)):
    """Seeded training instance: standardized-scale features, mixed kernels,
    per-family penalty weights drawn log-uniform from 10^lam_range."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(*m_range))
    p = int(rng.integers(*p_range))
    n = int(rng.integers(2, 7))
    X = rng.standard_normal((m, n))
    y = rng.choice([-1.0, 1.0], size=m)
    pool = [
        kernels.linear(),
        kernels.polynomial(2),
        kernels.polynomial(3),
        kernels.gaussian(float(rng.uniform(0.05, 1.0))),
        kernels.sigmoid(float(rng.uniform(0.2, 1.0)), float(rng.uniform(-0.5, 0.5))),
    ]
    idx = rng.choice(len(pool), size=p, replace=False)
    stack = build_stack([pool[i] for i in idx], X)
    pen = penalty_vector(10.0 ** rng.uniform(*lam_range, size=p), 1.0, 0.0)
    return stack, y, pen


def blob_dataset(seed, m=100, n=5, separation=3.0):
    """Two well-separated gaussian blobs with ±1 labels."""
    rng = np.random.default_rng(seed)
    y = rng.choice([-1.0, 1.0], size=m)
    direction = rng.standard_normal(n)
    direction /= np.linalg.norm(direction)
    X = rng.standard_normal((m, n)) + separation * y[:, None] * direction[None, :]
    return Dataset(X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
