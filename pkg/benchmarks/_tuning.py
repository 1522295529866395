"""Shared setup for the desk-scale tuning scripts.

Tuning uses phantoms from the training split only; the held-out test split
is reserved for the end-to-end checks.
"""

from mrilab import presets
from mrilab.diffusion import make_vp_schedule
from mrilab.forward_model import apply_adjoint
from mrilab.metrics import psnr


def tuning_cases(n=2, R=None):
    ds = presets.desk_dataset()
    return [(img, *presets.desk_problem(img, R=R)) for img in ds.train[:n]]


def desk_model():
    schedule = make_vp_schedule(presets.DESK_SAMPLER["T"])
    return presets.desk_denoiser(schedule, train_if_missing=False), schedule


def zero_filled_psnr(img, coils, y):
    return psnr(apply_adjoint(y, coils), img)
