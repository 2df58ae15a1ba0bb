import math

import numpy as np
import pytest


def gaussian_mc(f, q, n_samples, seed):
    """Seeded Monte Carlo estimate of E[f(z)], z ~ N(0, q).

    Returns (estimate, standard_error); sampling is chunked so the oracle
    can afford 1e7 draws without a large allocation.
    """
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    remaining = int(n_samples)
    scale = math.sqrt(q)
    while remaining > 0:
        chunk = min(remaining, 1_000_000)
        vals = np.asarray(f(scale * rng.standard_normal(chunk)), dtype=float)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        remaining -= chunk
    n = float(n_samples)
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
