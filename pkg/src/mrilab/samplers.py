"""Posterior samplers: INR-guided (DiffINR), DPS, k-space projection, unconditional.

All samplers start from ``x_T ~ N(0, I)`` and run the reverse VP chain
``t = T..1``. Randomness comes from two seeded torch generators: one for the
chain itself (``x_T`` and ancestral noise) and one for measurement-side
draws (renoising and noise-matched projection), so that a guided run and an
unconditional run with the same seed share their chain noise.
"""

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .diffusion import ancestral_step, randn_like, renoise, tweedie_denoise
from .errors import ConfigurationError, InvalidInputError, TrainingError
from .forward_model import TorchOperator, ifft2c_t
from .inr import INRConfig, dc_refine, kspace_l1, make_grid, prior_embed
from .tensorio import save_tensor

METHODS = ("diffinr", "dps", "projection", "unconditional")

# picked by benchmarks/tune_dps_zeta.py on the desk setup (log in benchmarks/dps_zeta_search.json)
DEFAULT_DPS_ZETA = 0.85

_CDTYPES = {"float32": torch.complex64, "float64": torch.complex128}


@dataclass
class SamplerConfig:
    T: int = 2000
    t_star: int = 1200
    k: int = 50
    method: str = "diffinr"
    dps_zeta: float = DEFAULT_DPS_ZETA
    seed: int = 0
    record_trace: bool = True
    inr: INRConfig = field(default_factory=INRConfig)
    kspace_substitution: bool = False
    warm_start: bool = False
    dtype: str = "float32"

    def validate(self, schedule=None):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 1 <= self.t_star <= self.T:
            raise ConfigurationError(f"need 1 <= t_star <= T, got t_star={self.t_star}, T={self.T}")
        if not 1 <= self.k <= self.t_star:
            raise ConfigurationError(f"need 1 <= k <= t_star, got k={self.k}, t_star={self.t_star}")
        if self.method == "dps" and not self.dps_zeta >= 0:
            raise ConfigurationError("dps_zeta must be >= 0 for the dps method (0 disables guidance)")
        if self.dtype not in _CDTYPES:
            raise ConfigurationError(f"dtype must be one of {tuple(_CDTYPES)}")
        if schedule is not None and schedule.T != self.T:
            raise ConfigurationError(f"schedule has T={schedule.T} but config has T={self.T}")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        inr = d.pop("inr", None)
        return cls(inr=INRConfig.from_dict(inr) if inr else INRConfig(), **d)


@dataclass
class ReconResult:
    image: np.ndarray
    method: str
    seed: int
    config: dict
    diagnostics: list = field(default_factory=list)
    final_residual: float = math.nan

    def trace(self):
        return {
            "method": self.method,
            "seed": self.seed,
            "config": self.config,
            "final_residual": self.final_residual,
            "diagnostics": self.diagnostics,
        }

    def save(self, path):
        path = Path(path)
        save_tensor(path, self.image, meta={"method": self.method, "seed": self.seed})
        trace_path = path.with_suffix(".trace.json")
        tmp = trace_path.with_name(trace_path.name + ".tmp")
        tmp.write_text(json.dumps(self.trace(), indent=1))
        tmp.replace(trace_path)
        return path, trace_path


def inr_timesteps(T, t_star, k):
    """Chain indices ``t - 1`` after which the INR module runs, in firing order."""
    fires = set(range(t_star, -1, -k)) | {0}
    return sorted((s for s in fires if 0 <= s <= min(t_star, T - 1)), reverse=True)


class _Setup:
    def __init__(self, y, coils, mask, model, schedule, cfg):
        cfg.validate(schedule)
        self.cfg = cfg
        self.schedule = schedule
        self.model = model
        self.cdtype = _CDTYPES[cfg.dtype]
        data = y.data if hasattr(y, "data") else y
        self.op = TorchOperator(coils, mask, dtype=self.cdtype)
        self.y = torch.as_tensor(np.asarray(data)).to(self.cdtype) * self.op.keep
        if tuple(self.y.shape) != tuple(self.op.maps.shape):
            raise InvalidInputError(f"k-space shape {tuple(self.y.shape)} does not match coils {tuple(self.op.maps.shape)}")
        self.shape = tuple(self.op.keep.shape)
        self.chain = torch.Generator().manual_seed(int(cfg.seed))
        self.aux = torch.Generator().manual_seed(int(cfg.seed) + 1_000_003)
        self.t0 = time.perf_counter()

    def initial(self):
        return randn_like(torch.zeros(self.shape, dtype=self.cdtype), self.chain)

    def chain_noise(self, x):
        return randn_like(x, self.chain)

    def aux_noise(self, like):
        return randn_like(like, self.aux)

    def residual(self, image):
        return kspace_l1(image, self.y, self.op)

    def elapsed(self):
        return time.perf_counter() - self.t0

    def result(self, x, diagnostics):
        img = x.detach().to(torch.complex128).numpy()
        return ReconResult(
            image=img,
            method=self.cfg.method,
            seed=int(self.cfg.seed),
            config=self.cfg.to_dict(),
            diagnostics=diagnostics if self.cfg.record_trace else [],
            final_residual=self.residual(x.detach()),
        )


def project_kspace(kspace, y, sampled, alpha_bar, noise):
    """Replace sampled entries by the noise-matched measurement ``sqrt(ab) y + sqrt(1 - ab) n``."""
    target = math.sqrt(alpha_bar) * y + math.sqrt(1.0 - alpha_bar) * noise
    return torch.where(sampled, target, kspace)


def _projection(setup, x, s):
    op = setup.op
    k = op.coil_kspace(x)
    k = project_kspace(k, setup.y, op.sampled, setup.schedule.alpha_bar_at(s), setup.aux_noise(k))
    return torch.sum(torch.conj(op.maps) * ifft2c_t(k), dim=-3)


def diffinr_sample(y, coils, mask, model, schedule, cfg):
    """INR-guided posterior sampling.

    Unconditional ancestral steps throughout; after each step that lands on
    an index in :func:`inr_timesteps` the Tweedie estimate is embedded into a
    fresh INR, refined against ``y`` and renoised back onto the chain. The
    refined image of the terminal pass (index 0) is returned.
    """
    setup = _Setup(y, coils, mask, model, schedule, cfg)
    fires = set(inr_timesteps(cfg.T, cfg.t_star, cfg.k))
    grid = make_grid(setup.shape)
    inr_cfg = cfg.inr
    inr_cdtype = _CDTYPES[inr_cfg.dtype]
    inr_op = setup.op if inr_cdtype == setup.cdtype else setup.op.to(inr_cdtype)
    diagnostics = []
    field_ = None
    x = setup.initial()
    for t in range(cfg.T, 0, -1):
        with torch.no_grad():
            x = ancestral_step(x, t, model, schedule, setup.chain_noise(x) if t > 1 else None)
        s = t - 1
        if s in fires:
            with torch.no_grad():
                prior = x if s == 0 else tweedie_denoise(x, s, model, schedule)
            try:
                init = field_ if cfg.warm_start else None
                field_, l_prior = prior_embed(prior.to(inr_cdtype), inr_cfg, seed=cfg.seed * 100_003 + s, grid=grid, init=init)
                field_, l_dc = dc_refine(field_, setup.y.to(inr_cdtype), None, None, inr_cfg, grid=grid, op=inr_op)
            except TrainingError as exc:
                raise TrainingError(f"INR module failed at chain index {s}: {exc}", step=s) from exc
            with torch.no_grad():
                x0_hat = field_(grid).to(setup.cdtype)
            diagnostics.append(
                {
                    "timestep": s,
                    "kind": "inr",
                    "residual_prior": setup.residual(prior),
                    "residual": setup.residual(x0_hat),
                    "prior_loss": [l_prior[0], l_prior[-1]] if l_prior else [],
                    "dc_loss": [l_dc[0], l_dc[-1]] if l_dc else [],
                    "wall_time": setup.elapsed(),
                }
            )
            x = renoise(x0_hat, s, schedule, setup.aux_noise(x0_hat) if s > 0 else None)
        elif cfg.kspace_substitution and s <= cfg.t_star:
            with torch.no_grad():
                x = _projection(setup, x, s)
    return setup.result(x, diagnostics)


def dps_sample(y, coils, mask, model, schedule, cfg):
    """Diffusion posterior sampling with squared-error guidance through Tweedie."""
    setup = _Setup(y, coils, mask, model, schedule, cfg)
    diagnostics = []
    zeta = float(cfg.dps_zeta)
    x = setup.initial()
    for t in range(cfg.T, 0, -1):
        ab = schedule.alpha_bar_at(t)
        x_in = x.detach().requires_grad_(True)
        score = model.score(x_in, t)
        x0 = tweedie_denoise(x_in, t, model, schedule, eps=-math.sqrt(1.0 - ab) * score)
        r = setup.op.sampled_residual(x0, setup.y)
        loss = torch.sum(r.real**2 + r.imag**2)
        (grad,) = torch.autograd.grad(loss, x_in)
        with torch.no_grad():
            x = ancestral_step(x_in.detach(), t, model, schedule, setup.chain_noise(x) if t > 1 else None, score=score.detach())
            x = x - zeta * grad
            if cfg.record_trace:
                diagnostics.append(
                    {
                        "timestep": t,
                        "kind": "dps",
                        "residual": float(torch.sum(torch.abs(r))),
                        "wall_time": setup.elapsed(),
                    }
                )
    return setup.result(x, diagnostics)


def projection_sample(y, coils, mask, model, schedule, cfg):
    """Ancestral sampling with noise-matched k-space substitution after every step."""
    setup = _Setup(y, coils, mask, model, schedule, cfg)
    diagnostics = []
    x = setup.initial()
    for t in range(cfg.T, 0, -1):
        with torch.no_grad():
            x = ancestral_step(x, t, model, schedule, setup.chain_noise(x) if t > 1 else None)
            x = _projection(setup, x, t - 1)
            if cfg.record_trace:
                diagnostics.append(
                    {"timestep": t - 1, "kind": "projection", "residual": setup.residual(x), "wall_time": setup.elapsed()}
                )
    return setup.result(x, diagnostics)


def unconditional_sample(model, schedule, shape, seed=0, dtype="float32"):
    """Pure ancestral chain; ``shape`` may carry leading batch dimensions."""
    cdtype = _CDTYPES[dtype]
    g = torch.Generator().manual_seed(int(seed))
    x = randn_like(torch.zeros(tuple(shape), dtype=cdtype), g)
    with torch.no_grad():
        for t in range(schedule.T, 0, -1):
            x = ancestral_step(x, t, model, schedule, randn_like(x, g) if t > 1 else None)
    return x


SAMPLERS = {"diffinr": diffinr_sample, "dps": dps_sample, "projection": projection_sample}


def reconstruct(y, coils, mask, model, schedule, cfg):
    if cfg.method not in SAMPLERS:
        raise ConfigurationError(f"method {cfg.method!r} does not reconstruct from measurements")
    return SAMPLERS[cfg.method](y, coils, mask, model, schedule, cfg)
