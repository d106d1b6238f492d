from __future__ import annotations

import numpy as np
import pytest

from cpustat.nulldist import cached_samples


def triple_loop_z(x, kernel, tup, theta):
    """Z value at one tuple by explicit loops over 1-based indices."""
    n = len(x)
    m = [1, *tup, n]
    total = 0.0
    for l in range(1, len(m) - 1):
        for i in range(m[l - 1] + 1, m[l] + 1):
            for j in range(m[l] + 1, m[l + 1] + 1):
                total += kernel(x[i - 1], x[j - 1]) - theta
    return total * n ** -1.5


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def null_cache(tmp_path_factory):
    return tmp_path_factory.mktemp("null-cache")


@pytest.fixture(scope="session")
def ci_samples(null_cache):
    """CI-scale bridge samples (k=2, m=500, 1000 paths)."""
    return cached_samples(null_cache, 2, 500, 1000, 42)


@pytest.fixture(scope="session")
def ci_table(ci_samples):
    return ci_samples.table()
