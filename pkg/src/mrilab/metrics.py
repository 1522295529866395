"""PSNR, SSIM and error maps on magnitude images."""

import math
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.signal import correlate2d

from .errors import ConfigurationError, InvalidInputError

ERROR_MAP_PRESETS = (5, 10)


def _pair(x, ref):
    x, ref = np.asarray(x), np.asarray(ref)
    if x.shape != ref.shape:
        raise InvalidInputError(f"shape mismatch: {x.shape} vs {ref.shape}")
    return x, ref


def _magnitude(a):
    return np.abs(a) if np.iscomplexobj(a) else np.asarray(a, dtype=np.float64)


def psnr(x, ref):
    """``20 log10(max|ref| / RMSE(|x|, |ref|))``; ``inf`` for identical magnitudes."""
    x, ref = _pair(x, ref)
    a, b = np.abs(x), np.abs(ref)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return math.inf
    return float(20.0 * np.log10(b.max() / np.sqrt(mse)))


def gaussian_window(size=7, sigma=1.5):
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(x, ref, window=7, sigma=1.5, k1=0.01, k2=0.03, data_range=None):
    """Mean SSIM over all fully contained ``window`` x ``window`` Gaussian windows.

    Complex inputs are compared by magnitude; real inputs are used as given.
    ``data_range`` defaults to ``max|ref|``.
    """
    x, ref = _pair(x, ref)
    a, b = _magnitude(x), _magnitude(ref)
    if min(a.shape) < window:
        raise InvalidInputError(f"images smaller than the {window}x{window} SSIM window")
    L = float(np.abs(b).max()) if data_range is None else float(data_range)
    if L <= 0:
        raise ConfigurationError("SSIM dynamic range must be positive")
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    w = gaussian_window(window, sigma)

    def filt(img):
        return correlate2d(img, w, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def error_map(x, ref, scale=5, path=None):
    """Scaled magnitude error as an 8-bit grayscale array (and PNG if ``path``).

    The error ``| |x| - |ref| | * scale`` is clipped to ``[0, max|ref|]`` and
    mapped linearly onto 0..255.
    """
    x, ref = _pair(x, ref)
    if not scale > 0:
        raise ConfigurationError("error-map scale must be > 0")
    top = float(np.abs(ref).max()) or 1.0
    err = np.clip(np.abs(np.abs(x) - np.abs(ref)) * scale, 0.0, top)
    img = np.round(err / top * 255.0).astype(np.uint8)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(img).save(path)
    return img
