"""Diffusion core: VP schedule, reverse-chain steps and score providers."""

from .core import (
    NoiseSchedule,
    ScoreModel,
    ancestral_step,
    forward_diffuse,
    make_vp_schedule,
    randn_like,
    renoise,
    tweedie_denoise,
)
from .denoiser import DenoiserModel, DenoiserNet, TrainConfig, load_denoiser, save_denoiser, train_denoiser
from .gmm import GMMPrior, GMMScoreModel, gmm_log_density, gmm_score, parse_gmm_spec

__all__ = [
    "DenoiserModel",
    "DenoiserNet",
    "GMMPrior",
    "GMMScoreModel",
    "NoiseSchedule",
    "ScoreModel",
    "TrainConfig",
    "ancestral_step",
    "forward_diffuse",
    "gmm_log_density",
    "gmm_score",
    "load_denoiser",
    "make_vp_schedule",
    "parse_gmm_spec",
    "randn_like",
    "renoise",
    "save_denoiser",
    "train_denoiser",
    "tweedie_denoise",
]
