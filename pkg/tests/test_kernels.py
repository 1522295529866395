import numpy as np
import pytest

from mrilab import _pykernels, kernels

try:
    from mrilab import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_dense_level_indices_and_weights():
    coords = np.array([[0.0, 0.0], [0.5, 0.25], [0.999, 0.999]])
    idx, w = _pykernels.grid_lookup(coords, 4, 2**10)
    assert idx[0].tolist() == [0, 1, 5, 6]
    assert w[0].tolist() == [1.0, 0.0, 0.0, 0.0]
    # (0.5, 0.25) * 4 = (2, 1): exactly on vertex (2, 1)
    assert idx[1, 0] == 2 + 1 * 5 and w[1, 0] == 1.0
    np.testing.assert_allclose(w.sum(axis=1), 1.0)


def test_hashed_level_uses_spatial_hash():
    coords = np.array([[0.3, 0.7]])
    res, size = 100, 2**8
    idx, _ = _pykernels.grid_lookup(coords, res, size)
    vx, vy = 30, 70
    expect = [(x ^ (y * 2654435761)) % size for x, y in ((vx, vy), (vx + 1, vy), (vx, vy + 1), (vx + 1, vy + 1))]
    assert idx[0].tolist() == expect


@needs_ext
@pytest.mark.parametrize("res,size", [(16, 2**19), (64, 2**19), (200, 2**12), (37, 2**19)])
def test_grid_lookup_backends_agree(res, size, rng):
    coords = rng.random((500, 2))
    a = _pykernels.grid_lookup(coords, res, size)
    b = _ckernels.grid_lookup(coords, res, size)
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1], b[1])


@needs_ext
@pytest.mark.parametrize("r0,alpha", [(1.5, 2.0), (3.0, 0.0), (2.2, 1.0)])
def test_poisson_disc_backends_agree(r0, alpha, rng):
    order = rng.permutation(40 * 48)
    a = _pykernels.poisson_disc(40, 48, r0, alpha, order)
    b = _ckernels.poisson_disc(40, 48, r0, alpha, order)
    assert np.array_equal(a, b)


def test_poisson_disc_respects_radius(rng):
    h, w, r0 = 32, 32, 2.5
    keep = _pykernels.poisson_disc(h, w, r0, 0.0, rng.permutation(h * w))
    pts = np.argwhere(keep)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(d, np.inf)
    assert d.min() >= r0
