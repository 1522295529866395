"""VP-SDE schedule and the per-step maps of the reverse chain.

Timesteps are 1-based: ``t = 1..T``; index 0 denotes clean data with
``alpha_bar(0) = 1``. The step maps are plain arithmetic and accept numpy
arrays or torch tensors alike; score providers work on torch tensors of
shape (..., H, W), complex or real.
"""

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import ConfigurationError, InvalidInputError


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray
    beta_min: float
    beta_max: float

    def _check(self, t, lo):
        if not (lo <= int(t) <= self.T):
            raise InvalidInputError(f"timestep {t} outside [{lo}, {self.T}]")
        return int(t)

    def beta_at(self, t):
        return float(self.beta[self._check(t, 1) - 1])

    def alpha_bar_at(self, t):
        t = self._check(t, 0)
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])

    def to_dict(self):
        return {"T": self.T, "beta_min": self.beta_min, "beta_max": self.beta_max}

    @classmethod
    def from_dict(cls, d):
        return make_vp_schedule(d["T"], d["beta_min"], d["beta_max"])


def make_vp_schedule(T, beta_min=None, beta_max=None):
    """Linear beta ramp over ``T`` steps.

    Defaults are the discretisation of the continuous VP-SDE with
    beta(s) in [0.1, 20]: ``beta_min = 0.1 / T`` and ``beta_max = 20 / T``
    (1e-4 and 0.02 at T = 1000), which keeps ``alpha_bar_T`` below 1e-3 for
    any ``T >= 25``. The default ``beta_max`` is capped at 0.5 for short chains.
    """
    T = int(T)
    if T < 10:
        raise ConfigurationError(f"T must be >= 10, got {T}")
    beta_min = 0.1 / T if beta_min is None else float(beta_min)
    beta_max = min(20.0 / T, 0.5) if beta_max is None else float(beta_max)
    if not (0 < beta_min <= beta_max < 1):
        raise ConfigurationError(
            f"need 0 < beta_min <= beta_max < 1, got beta_min={beta_min}, beta_max={beta_max}"
        )
    beta = np.linspace(beta_min, beta_max, T, dtype=np.float64)
    alpha_bar = np.cumprod(1.0 - beta)
    return NoiseSchedule(T, beta, alpha_bar, beta_min, beta_max)


class ScoreModel:
    """Score provider bound to a noise schedule.

    Subclasses implement either :meth:`eps` or :meth:`score`; the other
    follows from ``eps = -sqrt(1 - alpha_bar_t) * score``.
    """

    schedule: NoiseSchedule

    def eps(self, x, t):
        return -np.sqrt(1.0 - self.schedule.alpha_bar_at(t)) * self.score(x, t)

    def score(self, x, t):
        return -self.eps(x, t) / np.sqrt(1.0 - self.schedule.alpha_bar_at(t))


def forward_diffuse(x0, t, eps_draw, schedule):
    ab = schedule.alpha_bar_at(schedule._check(t, 1))
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps_draw


def tweedie_denoise(x_t, t, model, schedule, eps=None):
    """Posterior-mean estimate ``(x_t - sqrt(1 - ab) eps) / sqrt(ab)``.

    ``eps`` may be passed when the noise prediction is already available.
    """
    ab = schedule.alpha_bar_at(schedule._check(t, 1))
    if eps is None:
        eps = model.eps(x_t, t)
    return (x_t - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)


def ancestral_step(x_t, t, model, schedule, noise_draw, score=None):
    """Reverse VP-SDE step ``(1 + b/2) x + b * score + sqrt(b) * noise``.

    No noise is added at ``t = 1`` so the terminal sample is deterministic.
    """
    b = schedule.beta_at(t)
    if score is None:
        score = model.score(x_t, t)
    out = (1.0 + 0.5 * b) * x_t + b * score
    if int(t) > 1 and noise_draw is not None:
        out = out + np.sqrt(b) * noise_draw
    return out


def renoise(x0_hat, t_minus_1, schedule, noise_draw):
    """Map a clean estimate back onto the chain at index ``t_minus_1``."""
    t = int(t_minus_1)
    if not (0 <= t <= schedule.T - 1):
        raise InvalidInputError(f"renoise index {t} outside [0, {schedule.T - 1}]")
    if t == 0:
        return x0_hat
    ab = schedule.alpha_bar_at(t)
    return np.sqrt(ab) * x0_hat + np.sqrt(1.0 - ab) * noise_draw


def randn_like(x, generator):
    """Standard normal draw; complex tensors get N(0, 1) real and imaginary parts."""
    if torch.is_complex(x):
        real = x.real.dtype
        return torch.complex(
            torch.randn(x.shape, generator=generator, dtype=real),
            torch.randn(x.shape, generator=generator, dtype=real),
        )
    return torch.randn(x.shape, generator=generator, dtype=x.dtype)
