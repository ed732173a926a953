import numpy as np
import pytest

from heterloss.data import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def small_dataset():
    """Six-group synthetic dataset, small enough for fast training tests."""
    return generate_synthetic(SyntheticSpec.default(rows_per_group=3000, seed=21))


@pytest.fixture(scope="session")
def tiny_dataset():
    """Three-group dataset for cheap harness plumbing tests."""
    spec = SyntheticSpec.default(rows_per_group=900, seed=33)
    groups = tuple(g for g in spec.groups if g.name in ("urban", "suburban", "rural_flat"))
    return generate_synthetic(
        SyntheticSpec(groups=groups, seed=33)
    )


def finite_difference_grads(loss_fn, params, h=1e-5):
    """Central finite differences of a scalar loss over parameter arrays."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            old = p[ix]
            p[ix] = old + h
            lp = loss_fn()
            p[ix] = old - h
            lm = loss_fn()
            p[ix] = old
            g[ix] = (lp - lm) / (2.0 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric, floor=1e-7):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
