import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from mrilab.errors import ConfigurationError, InvalidInputError
from mrilab.metrics import error_map, gaussian_window, psnr, ssim

from .conftest import crandn


def _ssim_loop(a, b, size=7, sigma=1.5, k1=0.01, k2=0.03):
    """Window-by-window SSIM with explicit weighted sums."""
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r**2) / (2 * sigma**2))
    w = np.outer(g, g)
    w /= w.sum()
    L = np.abs(b).max()
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    vals = []
    for i in range(a.shape[0] - size + 1):
        for j in range(a.shape[1] - size + 1):
            pa, pb = a[i : i + size, j : j + size], b[i : i + size, j : j + size]
            ma, mb = np.sum(w * pa), np.sum(w * pb)
            va = np.sum(w * (pa - ma) ** 2)
            vb = np.sum(w * (pb - mb) ** 2)
            cov = np.sum(w * (pa - ma) * (pb - mb))
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def test_psnr_known_value():
    ref = np.zeros((8, 8))
    ref[0, 0] = 1.0
    x = ref + 0.1
    x[0, 0] = 1.0
    mse = 0.01 * 63 / 64
    assert psnr(x, ref) == pytest.approx(10 * math.log10(1 / mse), abs=1e-12)


def test_psnr_twenty_db():
    ref = np.ones((10, 10))
    assert psnr(ref * 1.1, ref) == pytest.approx(20.0, abs=1e-9)


def test_psnr_identical_and_phase_blind(rng):
    ref = crandn(rng, (16, 16))
    assert psnr(ref, ref) == math.inf
    # a global phase only perturbs magnitudes by rounding
    assert psnr(ref * np.exp(1j * 0.7), ref) > 250


def test_psnr_matches_independent_implementation(rng):
    for _ in range(10):
        ref = crandn(rng, (32, 32))
        x = ref + rng.uniform(0.01, 0.5) * crandn(rng, (32, 32))
        a, b = np.abs(x).ravel(), np.abs(ref).ravel()
        rmse = math.sqrt(sum((p - q) ** 2 for p, q in zip(a, b)) / a.size)
        assert psnr(x, ref) == pytest.approx(20 * math.log10(max(b) / rmse), abs=1e-9)


def test_ssim_matches_window_loop(rng):
    for _ in range(10):
        ref = np.abs(crandn(rng, (20, 24)))
        x = ref + rng.uniform(0.05, 1.0) * rng.standard_normal((20, 24))
        assert ssim(x, ref) == pytest.approx(_ssim_loop(x, ref), abs=1e-6)


def test_ssim_complex_uses_magnitude(rng):
    ref = crandn(rng, (16, 16))
    x = ref + 0.1 * crandn(rng, (16, 16))
    assert ssim(x, ref) == pytest.approx(_ssim_loop(np.abs(x), np.abs(ref)), abs=1e-6)


def test_ssim_identical_is_one(rng):
    ref = np.abs(crandn(rng, (16, 16)))
    assert ssim(ref, ref) == 1.0


def test_ssim_inverted_contrast_is_negative(rng):
    ref = rng.random((16, 16))
    assert ssim(ref.max() - ref, ref) < 0


@given(arrays(np.float64, (10, 10), elements=st.floats(-5, 5)), arrays(np.float64, (10, 10), elements=st.floats(0.1, 5)))
@settings(max_examples=60, deadline=None)
def test_ssim_bounded(x, ref):
    v = ssim(x, ref)
    assert -1.0 - 1e-9 <= v <= 1.0 + 1e-9


def test_metric_errors():
    with pytest.raises(InvalidInputError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(InvalidInputError):
        ssim(np.zeros((5, 5)), np.ones((5, 5)))
    with pytest.raises(ConfigurationError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))
    with pytest.raises(ConfigurationError):
        error_map(np.zeros((4, 4)), np.ones((4, 4)), scale=0)


def test_gaussian_window_normalised():
    w = gaussian_window()
    assert w.shape == (7, 7) and w.sum() == pytest.approx(1.0) and np.allclose(w, w.T)


def test_error_map_scaling_and_png(tmp_path):
    ref = np.ones((4, 4))
    x = ref.copy()
    x[0, 0] = 1.1
    x[1, 1] = 2.0
    img = error_map(x, ref, scale=5, path=tmp_path / "e.png")
    assert img.dtype == np.uint8
    assert img[0, 0] == round(0.5 * 255) and img[1, 1] == 255 and img[2, 2] == 0
    back = np.asarray(Image.open(tmp_path / "e.png"))
    assert np.array_equal(back, img)
    assert error_map(x, ref, scale=10)[0, 0] == 255


def test_error_map_identical_is_black(rng):
    ref = crandn(rng, (8, 8))
    assert not error_map(ref, ref).any()
