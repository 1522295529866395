"""Cartesian MRI acquisition model ``y = M F S x + e``.

Images are complex (H, W) arrays, coil maps (J, H, W) and k-space data
(J, H, W). The phase-encode direction is the last axis (columns); 1D masks
keep whole columns. All Fourier transforms are centred and orthonormal.

numpy functions implement the reference operators; the ``*_t`` variants are
differentiable torch equivalents used inside samplers and INR training.
"""

from dataclasses import dataclass, field

import numpy as np
import torch

from . import kernels
from .errors import ConfigurationError, InvalidInputError

PATTERNS = ("random1d", "gaussian1d", "gaussian2d", "poisson2d", "partial_fourier")
R_TOLERANCE = 0.05


def _check_finite(a, name="input"):
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite values")


def fft2c(x):
    """Centred orthonormal 2D DFT over the last two axes."""
    x = np.asarray(x)
    _check_finite(x)
    k = np.fft.ifftshift(x, axes=(-2, -1))
    k = np.fft.fft2(k, norm="ortho")
    return np.fft.fftshift(k, axes=(-2, -1))


def ifft2c(k):
    """Inverse of :func:`fft2c`."""
    k = np.asarray(k)
    _check_finite(k)
    x = np.fft.ifftshift(k, axes=(-2, -1))
    x = np.fft.ifft2(x, norm="ortho")
    return np.fft.fftshift(x, axes=(-2, -1))


def fft2c_t(x):
    x = torch.fft.ifftshift(x, dim=(-2, -1))
    x = torch.fft.fft2(x, norm="ortho")
    return torch.fft.fftshift(x, dim=(-2, -1))


def ifft2c_t(k):
    k = torch.fft.ifftshift(k, dim=(-2, -1))
    k = torch.fft.ifft2(k, norm="ortho")
    return torch.fft.fftshift(k, dim=(-2, -1))


@dataclass
class SamplingMask:
    """Binary k-space selector with the parameters that generated it."""

    keep: np.ndarray
    pattern: str
    R: float
    acs: int
    seed: int

    @property
    def shape(self):
        return self.keep.shape

    @property
    def n_kept(self):
        return int(self.keep.sum())

    @property
    def R_eff(self):
        return self.keep.size / max(self.n_kept, 1)

    def meta(self):
        return {"pattern": self.pattern, "R": float(self.R), "acs": int(self.acs), "seed": int(self.seed)}

    @classmethod
    def from_array(cls, keep, meta=None):
        meta = meta or {}
        keep = np.asarray(keep).astype(np.uint8)
        if not np.all((keep == 0) | (keep == 1)):
            raise InvalidInputError("mask entries must be 0 or 1")
        return cls(
            keep=keep,
            pattern=meta.get("pattern", "custom"),
            R=float(meta.get("R", keep.size / max(int(keep.sum()), 1))),
            acs=int(meta.get("acs", 0)),
            seed=int(meta.get("seed", 0)),
        )


@dataclass
class CoilSensitivities:
    maps: np.ndarray
    support: np.ndarray = field(default=None)

    def __post_init__(self):
        self.maps = np.asarray(self.maps)
        if self.maps.ndim == 2:
            self.maps = self.maps[None]
        if self.maps.ndim != 3:
            raise InvalidInputError(f"coil maps must be (J, H, W), got {self.maps.shape}")
        if self.support is None:
            sos = np.sum(np.abs(self.maps) ** 2, axis=0)
            self.support = (sos > 1e-12).astype(np.uint8)

    @property
    def J(self):
        return self.maps.shape[0]

    @property
    def shape(self):
        return self.maps.shape[1:]

    @classmethod
    def single(cls, shape):
        return cls(np.ones((1,) + tuple(shape), dtype=np.complex128))


@dataclass
class KSpaceMeasurement:
    data: np.ndarray
    mask: SamplingMask


def _keep(mask):
    return mask.keep if isinstance(mask, SamplingMask) else np.asarray(mask)


def _maps(coils):
    if isinstance(coils, CoilSensitivities):
        return coils.maps
    maps = np.asarray(coils)
    return maps[None] if maps.ndim == 2 else maps


# ---------------------------------------------------------------------------
# masks


def _phase_budget(width, R, acs):
    n_lines = int(round(width / R))
    if acs > n_lines:
        raise ConfigurationError(
            f"ACS of {acs} lines exceeds the budget of {n_lines} lines at R={R}"
        )
    return n_lines


def _acs_slice(n, acs):
    start = n // 2 - acs // 2
    return slice(start, start + acs)


def _lines_to_mask(lines, height):
    return np.repeat(lines[None, :].astype(np.uint8), height, axis=0)


def _random1d(shape, R, acs, rng):
    height, width = shape
    n_lines = _phase_budget(width, R, acs)
    lines = np.zeros(width, dtype=np.uint8)
    lines[_acs_slice(width, acs)] = 1
    free = np.flatnonzero(lines == 0)
    picked = rng.choice(free, size=n_lines - acs, replace=False)
    lines[picked] = 1
    return _lines_to_mask(lines, height)


def _gaussian_weights(n):
    d = np.arange(n) - n // 2
    sigma = n / 6.0
    return np.exp(-(d**2) / (2.0 * sigma**2))


def _gaussian1d(shape, R, acs, rng):
    height, width = shape
    n_lines = _phase_budget(width, R, acs)
    lines = np.zeros(width, dtype=np.uint8)
    lines[_acs_slice(width, acs)] = 1
    free = np.flatnonzero(lines == 0)
    p = _gaussian_weights(width)[free]
    picked = rng.choice(free, size=n_lines - acs, replace=False, p=p / p.sum())
    lines[picked] = 1
    return _lines_to_mask(lines, height)


def _acs_square(shape, acs):
    keep = np.zeros(shape, dtype=np.uint8)
    keep[_acs_slice(shape[0], acs), _acs_slice(shape[1], acs)] = 1
    return keep


def _point_budget(shape, R, acs):
    n_points = int(round(shape[0] * shape[1] / R))
    if acs * acs > n_points or acs > min(shape):
        raise ConfigurationError(
            f"ACS square of side {acs} exceeds the budget of {n_points} samples at R={R}"
        )
    return n_points


def _gaussian2d(shape, R, acs, rng):
    n_points = _point_budget(shape, R, acs)
    keep = _acs_square(shape, acs)
    w = np.outer(_gaussian_weights(shape[0]), _gaussian_weights(shape[1])).ravel()
    free = np.flatnonzero(keep.ravel() == 0)
    p = w[free]
    picked = rng.choice(free, size=n_points - int(keep.sum()), replace=False, p=p / p.sum())
    keep.ravel()[picked] = 1
    return keep


def _fit_count(keep, fixed, target, rng):
    """Randomly drop or add points outside ``fixed`` until ``keep`` has ``target`` entries."""
    keep = keep | fixed
    flat, locked = keep.ravel(), fixed.ravel().astype(bool)
    n = int(flat.sum())
    if n > target:
        drop = rng.choice(np.flatnonzero(flat.astype(bool) & ~locked), size=n - target, replace=False)
        flat[drop] = 0
    elif n < target:
        add = rng.choice(np.flatnonzero(flat == 0), size=target - n, replace=False)
        flat[add] = 1
    return keep


def _poisson2d(shape, R, acs, rng, alpha=2.0, iters=40):
    height, width = shape
    n_points = _point_budget(shape, R, acs)
    acs_keep = _acs_square(shape, acs)
    order = rng.permutation(height * width)

    def r_error(keep):
        return abs(keep.size / max(int(keep.sum()), 1) - R) / R

    def throw(r0):
        keep = kernels.poisson_disc(height, width, r0, alpha, order) | acs_keep
        return keep, int(keep.sum())

    # mean spacing at acceleration R is about sqrt(R); widen until too sparse
    lo, hi = 0.0, float(np.sqrt(R))
    while throw(hi)[1] > n_points and hi < max(shape):
        lo, hi = hi, 2.0 * hi
    best, best_err = None, np.inf
    for _ in range(iters):
        r0 = 0.5 * (lo + hi)
        keep, count = throw(r0)
        if r_error(keep) < best_err:
            best, best_err = keep, r_error(keep)
        if count == n_points:
            break
        if count > n_points:
            lo = r0
        else:
            hi = r0
    if best_err > R_TOLERANCE / 2:
        best = _fit_count(best, acs_keep, n_points, rng)
    return best.astype(np.uint8)


def _partial_fourier(shape, acs):
    height, width = shape
    keep = np.zeros(shape, dtype=np.uint8)
    start = width // 2 - acs // 2
    keep[:, start : start + width // 2] = 1
    return keep


def make_mask(pattern, shape, R, acs=0, seed=0):
    """Build an under-sampling mask.

    ``R`` counts the ACS region as sampled: the mask keeps ``round(N / R)``
    phase-encode lines (1D) or points (2D). ``acs`` is a number of central
    lines for 1D patterns and the side of the central square for 2D ones.
    ``partial_fourier`` ignores ``R`` and keeps half of the lines as one
    contiguous block that starts ``acs // 2`` lines below the centre.
    """
    if pattern not in PATTERNS:
        raise ConfigurationError(f"unknown mask pattern {pattern!r}; expected one of {PATTERNS}")
    shape = tuple(int(n) for n in shape)
    if len(shape) != 2 or min(shape) < 1:
        raise ConfigurationError(f"mask shape must be (H, W), got {shape}")
    acs = int(acs)
    if acs < 0:
        raise ConfigurationError("acs must be non-negative")
    rng = np.random.default_rng(seed)
    if pattern == "partial_fourier":
        if acs > shape[1] // 2:
            raise ConfigurationError(f"ACS of {acs} lines does not fit into half of k-space")
        return SamplingMask(_partial_fourier(shape, acs), pattern, 2.0, acs, int(seed))
    R = float(R)
    if not np.isfinite(R) or R < 1:
        raise ConfigurationError(f"acceleration R must be >= 1, got {R}")
    if R == 1:
        keep = np.ones(shape, dtype=np.uint8)
    elif pattern == "random1d":
        keep = _random1d(shape, R, acs, rng)
    elif pattern == "gaussian1d":
        keep = _gaussian1d(shape, R, acs, rng)
    elif pattern == "gaussian2d":
        keep = _gaussian2d(shape, R, acs, rng)
    else:
        keep = _poisson2d(shape, R, acs, rng)
    return SamplingMask(keep, pattern, R, acs, int(seed))


# ---------------------------------------------------------------------------
# operators


def _check_shapes(image_shape, maps, keep):
    if tuple(maps.shape[1:]) != tuple(image_shape) or tuple(keep.shape) != tuple(image_shape):
        raise InvalidInputError(
            f"shape mismatch: image {tuple(image_shape)}, coils {maps.shape}, mask {keep.shape}"
        )


def apply_forward(x, coils, mask):
    """``y_j = M * fft2c(S_j * x)`` for every coil."""
    x = np.asarray(x)
    maps, keep = _maps(coils), _keep(mask)
    if x.ndim != 2:
        raise InvalidInputError(f"image must be (H, W), got {x.shape}")
    _check_shapes(x.shape, maps, keep)
    data = keep * fft2c(maps * x)
    if not isinstance(mask, SamplingMask):
        mask = SamplingMask.from_array(keep)
    return KSpaceMeasurement(data, mask)


def apply_adjoint(y, coils, mask=None):
    """``x = sum_j conj(S_j) * ifft2c(M * y_j)``."""
    if isinstance(y, KSpaceMeasurement):
        if mask is None:
            mask = y.mask
        y = y.data
    y = np.asarray(y)
    maps = _maps(coils)
    keep = _keep(mask) if mask is not None else np.ones(y.shape[-2:], dtype=np.uint8)
    if y.shape != maps.shape:
        raise InvalidInputError(f"shape mismatch: k-space {y.shape}, coils {maps.shape}")
    _check_shapes(y.shape[-2:], maps, keep)
    return np.sum(np.conj(maps) * ifft2c(keep * y), axis=0)


def add_noise(y, sigma, seed):
    """Add complex Gaussian noise (std ``sigma`` per real/imag part) on sampled entries."""
    sigma = float(sigma)
    if not np.isfinite(sigma) or sigma < 0:
        raise ConfigurationError(f"noise sigma must be finite and >= 0, got {sigma}")
    if sigma == 0:
        return KSpaceMeasurement(y.data.copy(), y.mask)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(y.data.shape) + 1j * rng.standard_normal(y.data.shape)
    data = y.data + y.mask.keep * (sigma * noise)
    return KSpaceMeasurement(data, y.mask)


class TorchOperator:
    """Differentiable ``A`` and ``A^H`` for fixed coil maps and mask."""

    def __init__(self, coils, mask, dtype=torch.complex64):
        maps, keep = _maps(coils), _keep(mask)
        _check_shapes(keep.shape, maps, keep)
        self.maps = torch.as_tensor(maps).to(dtype)
        self.keep = torch.as_tensor(keep.astype(bool))
        self.sampled = self.keep.expand(self.maps.shape)

    def to(self, dtype):
        out = object.__new__(TorchOperator)
        out.maps, out.keep, out.sampled = self.maps.to(dtype), self.keep, self.sampled
        return out

    def coil_kspace(self, x):
        """Full (unmasked) coil k-space ``F S x`` of images shaped (..., H, W)."""
        return fft2c_t(self.maps * x.unsqueeze(-3))

    def forward(self, x):
        return self.coil_kspace(x) * self.keep

    def adjoint(self, y):
        return torch.sum(torch.conj(self.maps) * ifft2c_t(y * self.keep), dim=-3)

    def sampled_residual(self, x, y):
        """``A x - y`` restricted to the sampled entries (flattened)."""
        return self.coil_kspace(x)[..., self.sampled] - y[..., self.sampled]
