"""Synthetic complex phantoms, simulated coil maps and toy datasets."""

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, TensorIOError
from .forward_model import CoilSensitivities
from .tensorio import load_tensor, save_tensor

KINDS = ("shepp_logan", "random_ellipses", "smooth_blobs")
PHASES = ("zero", "smooth_random")
_PHASE_ALIASES = {"smooth": "smooth_random"}

# modified Shepp-Logan (Toft): intensity, a, b, x0, y0, angle in degrees
_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


@dataclass(frozen=True)
class PhantomSpec:
    kind: str = "random_ellipses"
    size: tuple = (64, 64)
    seed: int = 0
    phase: str = "zero"

    def __post_init__(self):
        object.__setattr__(self, "size", tuple(int(n) for n in self.size))
        object.__setattr__(self, "phase", _PHASE_ALIASES.get(self.phase, self.phase))
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown phantom kind {self.kind!r}; expected one of {KINDS}")
        if self.phase not in PHASES:
            raise ConfigurationError(f"unknown phase option {self.phase!r}; expected one of {PHASES}")
        if len(self.size) != 2 or min(self.size) < 8:
            raise ConfigurationError(f"phantom size must be at least 8x8, got {self.size}")

    def record(self):
        rec = asdict(self)
        rec["size"] = list(self.size)
        return rec


def _grid(size):
    h, w = size
    y = (np.arange(h) + 0.5) / h * 2.0 - 1.0
    x = (np.arange(w) + 0.5) / w * 2.0 - 1.0
    return np.meshgrid(x, -y)


def _ellipses(size, table):
    xx, yy = _grid(size)
    img = np.zeros(size)
    for rho, a, b, x0, y0, deg in table:
        th = np.deg2rad(deg)
        xr = (xx - x0) * np.cos(th) + (yy - y0) * np.sin(th)
        yr = -(xx - x0) * np.sin(th) + (yy - y0) * np.cos(th)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += rho
    return img


def _random_ellipse_table(rng):
    n = int(rng.integers(3, 9))
    table = []
    for i in range(n):
        # the first ellipse is a large body that the rest sit inside
        if i == 0:
            a, b = rng.uniform(0.6, 0.9, size=2)
            x0, y0 = rng.uniform(-0.1, 0.1, size=2)
        else:
            a, b = rng.uniform(0.08, 0.45, size=2)
            x0, y0 = rng.uniform(-0.5, 0.5, size=2)
        table.append((rng.uniform(0.1, 1.0), a, b, x0, y0, rng.uniform(0.0, 180.0)))
    return table


def _smooth_blobs(size, rng):
    xx, yy = _grid(size)
    img = np.zeros(size)
    for _ in range(int(rng.integers(3, 9))):
        cx, cy = rng.uniform(-0.6, 0.6, size=2)
        s = rng.uniform(0.08, 0.35)
        img += rng.uniform(0.2, 1.0) * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
    return img


def smooth_phase(size, rng, max_coef=0.5):
    """Random quadratic polynomial phase on [-1, 1]^2.

    With every coefficient bounded by ``max_coef`` the phase gradient is
    bounded by ``4 * max_coef`` radians per unit length.
    """
    xx, yy = _grid(size)
    c = rng.uniform(-max_coef, max_coef, size=6)
    c[0] *= 2 * np.pi
    return c[0] + c[1] * xx + c[2] * yy + c[3] * xx**2 + c[4] * xx * yy + c[5] * yy**2


def make_phantom(spec):
    """Complex phantom with magnitude normalised to max 1."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "shepp_logan":
        mag = _ellipses(spec.size, _SHEPP_LOGAN)
    elif spec.kind == "random_ellipses":
        mag = _ellipses(spec.size, _random_ellipse_table(rng))
    else:
        mag = _smooth_blobs(spec.size, rng)
    mag = np.abs(mag)
    mag /= mag.max()
    if spec.phase == "zero":
        return mag.astype(np.complex128)
    return mag * np.exp(1j * smooth_phase(spec.size, rng))


def simulate_coils(J, shape, seed=0):
    """Gaussian-lobe receive coils placed evenly around the FOV, SOS-normalised."""
    J = int(J)
    if J < 1:
        raise ConfigurationError(f"coil count must be >= 1, got {J}")
    shape = tuple(int(n) for n in shape)
    if J == 1:
        return CoilSensitivities.single(shape)
    rng = np.random.default_rng(seed)
    xx, yy = _grid(shape)
    offset = rng.uniform(0, 2 * np.pi)
    maps = np.empty((J,) + shape, dtype=np.complex128)
    for j in range(J):
        ang = offset + 2 * np.pi * j / J
        cx, cy = 1.2 * np.cos(ang), 1.2 * np.sin(ang)
        width = rng.uniform(0.6, 0.9)
        mag = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * width**2))
        kx, ky = rng.uniform(-np.pi / 2, np.pi / 2, size=2)
        maps[j] = mag * np.exp(1j * (kx * xx + ky * yy + rng.uniform(0, 2 * np.pi)))
    sos = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    maps /= sos
    return CoilSensitivities(maps, support=np.ones(shape, dtype=np.uint8))


@dataclass
class Dataset:
    images: list
    split: list
    manifest: list

    def subset(self, split):
        return [img for img, s in zip(self.images, self.split) if s == split]

    @property
    def train(self):
        return self.subset("train")

    @property
    def test(self):
        return self.subset("test")


def build_dataset(n_train, n_test, template, seed=0):
    """Phantoms drawn from ``template`` with disjoint per-image seeds."""
    if n_train < 1 or n_test < 1:
        raise ConfigurationError("n_train and n_test must both be >= 1")
    rng = np.random.default_rng(seed)
    seeds = rng.choice(2**31 - 1, size=n_train + n_test, replace=False)
    images, split, manifest = [], [], []
    for i, s in enumerate(seeds):
        spec = PhantomSpec(template.kind, template.size, int(s), template.phase)
        which = "train" if i < n_train else "test"
        images.append(make_phantom(spec))
        split.append(which)
        manifest.append({"index": i, "split": which, "file": f"{which}_{i:05d}.ct1", **spec.record()})
    return Dataset(images, split, manifest)


def image_digest(image):
    return hashlib.sha256(np.ascontiguousarray(image).tobytes()).hexdigest()


def save_dataset(dataset, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for img, rec in zip(dataset.images, dataset.manifest):
        save_tensor(directory / rec["file"], img)
    (directory / "manifest.json").write_text(json.dumps(dataset.manifest, indent=1))
    return directory


def load_dataset(directory):
    directory = Path(directory)
    path = directory / "manifest.json"
    if not path.is_file():
        raise TensorIOError(f"no dataset manifest at {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise TensorIOError(f"malformed dataset manifest {path}: {exc}") from exc
    images = [load_tensor(directory / rec["file"]) for rec in manifest]
    return Dataset(images, [rec["split"] for rec in manifest], manifest)
