"""Desk-scale reference setup: training data, cached toy denoiser, sampler defaults.

Everything here is a pure function of the constants below, so the cached
checkpoint is keyed by a hash of them.
"""

import hashlib
import json
import logging
import os
from pathlib import Path

from .diffusion import TrainConfig, load_denoiser, make_vp_schedule, train_denoiser
from .forward_model import apply_forward, make_mask
from .inr import INRConfig
from .phantom_data import PhantomSpec, build_dataset, make_phantom, simulate_coils
from .samplers import SamplerConfig

log = logging.getLogger(__name__)

IMAGE_SHAPE = (64, 64)
DATASET = {"n_train": 1000, "n_test": 10, "kind": "random_ellipses", "phase": "smooth_random", "seed": 0}
DENOISER_T = 1000
DENOISER_TRAIN = {"steps": 3000, "batch_size": 16, "lr": 1e-3, "ema_decay": 0.995, "seed": 0}
DENOISER_FORMAT = "precond-1"

# sampler defaults at 1/10 of the full CLI scale (t*/T = 0.6, k/T = 0.025)
DESK_SAMPLER = {"T": 200, "t_star": 120, "k": 10}

# data-consistency step size at desk scale (benchmarks/dc_lr_search.json);
# the CLI keeps 1e-5
DESK_INR = {"dc_lr": 3e-2}

# R = 1 sanity phantom
SMOKE_PHANTOM = {"kind": "shepp_logan", "size": IMAGE_SHAPE, "seed": 0, "phase": "smooth_random"}

# acquisition used by the end-to-end checks
DESK_ACQ = {"pattern": "random1d", "R": 4.0, "acs": 8, "mask_seed": 0, "J": 4, "coil_seed": 0}


def cache_dir():
    return Path(os.environ.get("MRILAB_CACHE", Path.home() / ".cache" / "mrilab"))


def desk_dataset():
    template = PhantomSpec(DATASET["kind"], IMAGE_SHAPE, 0, DATASET["phase"])
    return build_dataset(DATASET["n_train"], DATASET["n_test"], template, DATASET["seed"])


def _key():
    blob = json.dumps({"data": DATASET, "shape": IMAGE_SHAPE, "T": DENOISER_T, "train": DENOISER_TRAIN, "format": DENOISER_FORMAT}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def desk_denoiser_path():
    return cache_dir() / f"denoiser-{_key()}"


def desk_denoiser(schedule=None, train_if_missing=True):
    """Load (or train and cache) the toy denoiser on held-out-free phantoms."""
    path = desk_denoiser_path()
    if (path / "model.json").is_file():
        return load_denoiser(path, schedule)
    if not train_if_missing:
        raise FileNotFoundError(path)
    log.info("training desk denoiser into %s", path)
    cfg = {k: v for k, v in DENOISER_TRAIN.items() if k != "seed"}
    model = train_denoiser(
        desk_dataset(), make_vp_schedule(DENOISER_T), TrainConfig(**cfg), seed=DENOISER_TRAIN["seed"], checkpoint=path
    )
    return model if schedule is None else model.with_schedule(schedule)


def desk_problem(image, R=None, pattern=None):
    """Noise-free multi-coil measurement of ``image`` under the desk acquisition."""
    acq = DESK_ACQ
    coils = simulate_coils(acq["J"], image.shape, acq["coil_seed"])
    mask = make_mask(pattern or acq["pattern"], image.shape, acq["R"] if R is None else R, acq["acs"], acq["mask_seed"])
    return coils, mask, apply_forward(image, coils, mask)


def desk_sampler_config(method, seed=0, **overrides):
    return SamplerConfig(**DESK_SAMPLER, method=method, seed=seed, inr=INRConfig(**DESK_INR), **overrides)


def smoke_phantom():
    return make_phantom(PhantomSpec(**SMOKE_PHANTOM))
