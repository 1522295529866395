"""Hash-encoded coordinate network for complex images.

A field maps pixel-centre coordinates in [0, 1]^2 through a multiresolution
hash grid into two small ReLU MLPs, one for the real and one for the
imaginary channel. Training runs in two stages: :func:`prior_embed` fits the
field to a prior image (squared error), :func:`dc_refine` then fits the
sampled k-space of the measurement (L1 error).
"""

import copy
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from . import kernels
from .errors import ConfigurationError, InvalidInputError, TrainingError
from .forward_model import TorchOperator

_DTYPES = {"float32": (torch.float32, torch.complex64), "float64": (torch.float64, torch.complex128)}


@dataclass
class HashEncodingConfig:
    levels: int = 16
    features_per_level: int = 2
    table_size_log2: int = 19
    base_resolution: int = 16
    finest_resolution: int = None  # None: the larger image side

    def __post_init__(self):
        if self.levels < 1 or self.features_per_level < 1:
            raise ConfigurationError("hash encoding needs at least one level and one feature")
        if self.finest_resolution is not None and self.finest_resolution < self.base_resolution:
            raise ConfigurationError("finest_resolution must be >= base_resolution")

    @property
    def output_dim(self):
        return self.levels * self.features_per_level

    @property
    def table_size(self):
        return 2**self.table_size_log2

    def resolutions(self, shape=None):
        finest = self.finest_resolution
        if finest is None:
            finest = max(shape) if shape is not None else self.base_resolution
        finest = max(finest, self.base_resolution)
        if self.levels == 1:
            return [self.base_resolution]
        growth = math.exp((math.log(finest) - math.log(self.base_resolution)) / (self.levels - 1))
        return [int(math.floor(self.base_resolution * growth**lvl + 1e-9)) for lvl in range(self.levels)]

    def level_sizes(self, shape=None):
        return [min(self.table_size, (n + 1) ** 2) for n in self.resolutions(shape)]


@dataclass
class INRConfig:
    encoding: HashEncodingConfig = field(default_factory=HashEncodingConfig)
    hidden: int = 64
    prior_iters: int = 250
    prior_lr: float = 1e-3
    dc_iters: int = 250
    dc_lr: float = 1e-5
    init_scale: float = 1e-4
    dtype: str = "float32"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        enc = d.pop("encoding", {}) or {}
        return cls(encoding=HashEncodingConfig(**enc), **d)


@dataclass
class CoordinateGrid:
    coords: np.ndarray
    shape: tuple


def make_grid(shape):
    """Pixel-centre coordinates, row-major; column ``x`` then row ``y``."""
    h, w = (int(n) for n in shape)
    yy, xx = np.meshgrid((np.arange(h) + 0.5) / h, (np.arange(w) + 0.5) / w, indexing="ij")
    return CoordinateGrid(np.stack([xx.ravel(), yy.ravel()], axis=1), (h, w))


def _check_coords(coords):
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise InvalidInputError(f"coordinates must be (N, 2), got {coords.shape}")
    if not np.all(np.isfinite(coords)) or coords.min() < 0.0 or coords.max() > 1.0:
        raise InvalidInputError("coordinates must lie in [0, 1]^2")
    return coords


def grid_lookups(coords, config, shape=None):
    """Flat table slots and bilinear weights for every level, shape (N, L, 4)."""
    coords = _check_coords(coords)
    idx, wts = [], []
    offset = 0
    for res, size in zip(config.resolutions(shape), config.level_sizes(shape)):
        i, w = kernels.grid_lookup(coords, res, size)
        idx.append(i + offset)
        wts.append(w)
        offset += size
    return np.stack(idx, axis=1), np.stack(wts, axis=1)


def _encode(table, idx, weights):
    feats = torch.sum(table[idx] * weights.unsqueeze(-1), dim=-2)  # (N, L, F)
    return feats.reshape(feats.shape[0], -1)


def hash_encode(coords, config, tables, shape=None):
    """Encode (N, 2) coordinates with per-level tables; returns (N, L * F).

    ``tables`` is either a list with one (size_l, F) tensor per level or the
    concatenated (sum size_l, F) tensor used by :class:`INRField`.
    """
    if isinstance(tables, (list, tuple)):
        tables = torch.cat(list(tables), dim=0)
    idx, w = grid_lookups(coords, config, shape)
    return _encode(tables, torch.from_numpy(idx), torch.from_numpy(w).to(tables.dtype))


def _mlp(n_in, hidden, dtype):
    return nn.Sequential(
        nn.Linear(n_in, hidden, dtype=dtype),
        nn.ReLU(),
        nn.Linear(hidden, hidden, dtype=dtype),
        nn.ReLU(),
        nn.Linear(hidden, 1, dtype=dtype),
    )


class INRField(nn.Module):
    """Shared hash-grid tables feeding real- and imaginary-channel MLPs."""

    def __init__(self, shape, config=None, seed=0):
        super().__init__()
        self.config = config or INRConfig()
        self.shape = tuple(int(n) for n in shape)
        enc = self.config.encoding
        real, _ = _DTYPES[self.config.dtype]
        sizes = enc.level_sizes(self.shape)
        self.level_sizes = sizes
        g = torch.Generator().manual_seed(int(seed))
        s = self.config.init_scale
        table = (torch.rand((sum(sizes), enc.features_per_level), generator=g, dtype=real) * 2 - 1) * s
        self.table = nn.Parameter(table)
        with torch.random.fork_rng():
            torch.manual_seed(int(seed))
            self.mlp_re = _mlp(enc.output_dim, self.config.hidden, real)
            self.mlp_im = _mlp(enc.output_dim, self.config.hidden, real)
        self._lookup = None

    def tables(self):
        """Per-level views of the concatenated table."""
        return list(torch.split(self.table, self.level_sizes, dim=0))

    def lookups(self, grid):
        if self._lookup is None or self._lookup[0] is not grid:
            if tuple(grid.shape) != self.shape:
                raise InvalidInputError(f"grid shape {grid.shape} does not match field shape {self.shape}")
            idx, w = grid_lookups(grid.coords, self.config.encoding, self.shape)
            self._lookup = (grid, torch.from_numpy(idx), torch.from_numpy(w).to(self.table.dtype))
        return self._lookup[1:]

    def forward(self, grid):
        idx, w = self.lookups(grid)
        feats = _encode(self.table, idx, w)
        re = self.mlp_re(feats)[:, 0]
        im = self.mlp_im(feats)[:, 0]
        return torch.complex(re, im).reshape(self.shape)


def clone_field(field_):
    lookup, field_._lookup = field_._lookup, None
    try:
        clone = copy.deepcopy(field_)
    finally:
        field_._lookup = lookup
    clone._lookup = lookup
    return clone


def inr_forward(field_, grid):
    """Evaluate the field on ``grid``; returns a complex (H, W) tensor."""
    return field_(grid)


def prior_loss(field_, grid, target):
    diff = field_(grid) - target
    return torch.mean(diff.real**2 + diff.imag**2)


def dc_loss(field_, grid, y, op):
    """Mean modulus of ``A P(d) - y`` over sampled k-space entries only."""
    return torch.mean(torch.abs(op.sampled_residual(field_(grid), y)))


def _as_complex(x, dtype):
    return torch.as_tensor(np.asarray(x) if not torch.is_tensor(x) else x).to(dtype)


def _adam(field_, loss_fn, iters, lr, what):
    losses = []
    if iters <= 0:
        return losses
    opt = torch.optim.Adam(field_.parameters(), lr=lr)
    for it in range(iters):
        loss = loss_fn()
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingError(f"{what} loss became {value}", step=it)
        losses.append(value)
        opt.zero_grad()
        loss.backward()
        opt.step()
    with torch.no_grad():
        losses.append(float(loss_fn()))
    return losses


def prior_embed(prior_img, config=None, seed=0, grid=None, init=None):
    """Stage 1: fit a field to ``prior_img`` by Adam.

    The field is freshly initialised from ``seed`` unless ``init`` (a field
    to warm-start from, left untouched) is given. Returns ``(field, losses)``
    where ``losses[0]`` is the initial and ``losses[-1]`` the final mean
    squared error.
    """
    config = config or INRConfig()
    _, cdtype = _DTYPES[config.dtype]
    target = _as_complex(prior_img, cdtype).detach()
    if target.ndim != 2:
        raise InvalidInputError(f"prior image must be (H, W), got {tuple(target.shape)}")
    if not torch.all(torch.isfinite(torch.view_as_real(target))):
        raise InvalidInputError("prior image contains non-finite values")
    grid = grid or make_grid(target.shape)
    field_ = clone_field(init) if init is not None else INRField(target.shape, config, seed)
    losses = _adam(field_, lambda: prior_loss(field_, grid, target), config.prior_iters, config.prior_lr, "prior embedding")
    return field_, losses


def dc_refine(field_, y, coils, mask, config=None, grid=None, op=None):
    """Stage 2: refine a copy of ``field_`` against measured k-space (L1).

    ``y`` is a (J, H, W) array or :class:`KSpaceMeasurement`. Returns
    ``(refined_field, losses)``; the input field is left untouched.
    """
    config = config or field_.config
    _, cdtype = _DTYPES[field_.config.dtype]
    data = y.data if hasattr(y, "data") else y
    op = op or TorchOperator(coils, mask, dtype=cdtype)
    if not bool(op.keep.any()):
        raise ConfigurationError("mask keeps no k-space entries; nothing to refine against")
    data = _as_complex(data, cdtype).detach()
    if tuple(data.shape) != tuple(op.maps.shape):
        raise InvalidInputError(f"k-space shape {tuple(data.shape)} does not match coils {tuple(op.maps.shape)}")
    grid = grid or make_grid(field_.shape)
    refined = clone_field(field_)
    losses = _adam(refined, lambda: dc_loss(refined, grid, data, op), config.dc_iters, config.dc_lr, "DC refinement")
    return refined, losses


def kspace_l1(image, y, op):
    """Sum of moduli of the sampled k-space residual (diagnostic)."""
    with torch.no_grad():
        img = torch.as_tensor(image).to(op.maps.dtype)
        return float(torch.sum(torch.abs(op.sampled_residual(img, torch.as_tensor(y).to(op.maps.dtype)))))
