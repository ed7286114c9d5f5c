import numpy as np
import pytest

from density_softmax.autodiff import Tensor


def central_difference_grad(loss_fn, params: list[Tensor], h: float = 1e-5):
    """Numeric gradient oracle: perturb each parameter entry by +-h and
    difference the scalar loss. loss_fn rebuilds the graph from scratch."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = loss_fn()
            flat[i] = orig - h
            lo = loss_fn()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * h)
        grads.append(g)
    return grads


def assert_grads_close(analytic, numeric, rel_tol: float = 1e-4):
    for a, n in zip(analytic, numeric):
        denom = np.abs(a) + 1e-8
        rel = np.abs(a - n) / denom
        assert rel.max() < rel_tol, f"gradient mismatch: max rel err {rel.max():.3e}"


@pytest.fixture
def rng():
    return np.random.default_rng(0)
