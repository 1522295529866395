"""Small convolutional epsilon-prediction network and its training loop.

The network sees complex images as two real channels and is conditioned on
the noise level ``log sqrt((1 - ab) / ab)`` rather than on the integer
timestep, so a checkpoint can be sampled with any VP schedule whose noise
levels it has seen.

The raw network output is not epsilon itself. With ``v = 1 - ab + ab sd^2``
(``sd`` the per-component data scale) the prediction is

    eps = x sqrt(1 - ab) / v - sd sqrt(ab / v) * net(x / sqrt(v), level)

which is the EDM-style skip/output scaling rewritten for the VP
parameterisation. At high noise eps tends to ``x`` whatever the network
says, so reverse chains cannot be pushed off course by the large ``x0``
errors an unscaled epsilon network makes there. Training still minimises the
plain epsilon error.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from ..errors import TensorIOError, TrainingError
from ..tensorio import load_tensor, save_tensor
from .core import NoiseSchedule, ScoreModel

log = logging.getLogger(__name__)


def noise_level(alpha_bar):
    return 0.5 * math.log((1.0 - alpha_bar) / alpha_bar)


def predict_eps(net, h, ab, sigma_data):
    """Preconditioned epsilon for channel images ``h`` (B, C, H, W) at ``ab`` (B,)."""
    ab = ab.to(h.dtype)[:, None, None, None]
    v = 1.0 - ab + ab * sigma_data**2
    level = 0.5 * torch.log((1.0 - ab) / ab)[:, 0, 0, 0]
    out = net(h / torch.sqrt(v), level)
    return h * torch.sqrt(1.0 - ab) / v - sigma_data * torch.sqrt(ab / v) * out


def sinusoidal_embedding(level, dim):
    half = dim // 2
    freqs = torch.exp(-math.log(1000.0) * torch.arange(half, dtype=torch.float32) / half)
    arg = level[:, None] * freqs[None] * 4.0
    return torch.cat([torch.sin(arg), torch.cos(arg)], dim=1)


class ResBlock(nn.Module):
    def __init__(self, cin, cout, emb_dim, groups=8):
        super().__init__()
        self.norm1 = nn.GroupNorm(min(groups, cin), cin)
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.emb = nn.Linear(emb_dim, cout)
        self.norm2 = nn.GroupNorm(min(groups, cout), cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.skip = nn.Conv2d(cin, cout, 1) if cin != cout else nn.Identity()

    def forward(self, x, emb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.emb(emb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class DenoiserNet(nn.Module):
    """Four-level residual U-Net predicting epsilon for 2-channel images."""

    def __init__(self, channels=(16, 32, 64, 128), emb_dim=64, in_channels=2, sigma_data=0.5):
        super().__init__()
        self.sigma_data = float(sigma_data)
        self.channels = tuple(channels)
        self.emb_dim = emb_dim
        self.in_channels = in_channels
        self.emb_mlp = nn.Sequential(nn.Linear(emb_dim, emb_dim), nn.SiLU(), nn.Linear(emb_dim, emb_dim))
        self.inp = nn.Conv2d(in_channels, channels[0], 3, padding=1)
        self.down = nn.ModuleList()
        cin = channels[0]
        for c in channels:
            self.down.append(ResBlock(cin, c, emb_dim))
            cin = c
        self.mid = ResBlock(cin, cin, emb_dim)
        self.up = nn.ModuleList()
        for c in reversed(channels):
            self.up.append(ResBlock(cin + c, c, emb_dim))
            cin = c
        self.out_norm = nn.GroupNorm(min(8, cin), cin)
        self.out = nn.Conv2d(cin, in_channels, 3, padding=1)

    def arch(self):
        return {
            "channels": list(self.channels),
            "emb_dim": self.emb_dim,
            "in_channels": self.in_channels,
            "sigma_data": self.sigma_data,
        }

    def forward(self, x, level):
        emb = self.emb_mlp(sinusoidal_embedding(level, self.emb_dim))
        h = self.inp(x)
        skips = []
        for i, block in enumerate(self.down):
            h = block(h, emb)
            skips.append(h)
            if i < len(self.down) - 1:
                h = F.avg_pool2d(h, 2)
        h = self.mid(h, emb)
        for i, block in enumerate(self.up):
            skip = skips.pop()
            if h.shape[-1] != skip.shape[-1]:
                h = F.interpolate(h, size=skip.shape[-2:], mode="nearest")
            h = block(torch.cat([h, skip], dim=1), emb)
        return self.out(F.silu(self.out_norm(h)))


def _to_channels(x):
    if torch.is_complex(x):
        return torch.stack([x.real, x.imag], dim=-3)
    return x.unsqueeze(-3)


def _from_channels(h, like):
    if torch.is_complex(like):
        return torch.complex(h[..., 0, :, :], h[..., 1, :, :])
    return h[..., 0, :, :]


class DenoiserModel(ScoreModel):
    """Score provider backed by a trained :class:`DenoiserNet`."""

    def __init__(self, net, schedule, config=None, loss_trace=None, val_loss=None):
        self.net = net.eval()
        for p in self.net.parameters():
            p.requires_grad_(False)
        self.schedule = schedule
        self.config = config or {}
        self.loss_trace = loss_trace or []
        self.val_loss = val_loss or {}

    def with_schedule(self, schedule):
        return DenoiserModel(self.net, schedule, self.config, self.loss_trace, self.val_loss)

    def eps(self, x, t):
        batch_shape = x.shape[:-2]
        h = _to_channels(x).reshape((-1, 2 if torch.is_complex(x) else 1) + tuple(x.shape[-2:]))
        ab = torch.full((h.shape[0],), self.schedule.alpha_bar_at(t), dtype=torch.float64)
        out = predict_eps(self.net, h.to(torch.float32), ab, self.net.sigma_data).to(h.dtype)
        out = out.reshape(tuple(batch_shape) + tuple(out.shape[-3:]))
        return _from_channels(out, x)

    def describe(self):
        return {"kind": "denoiser", "arch": self.net.arch(), "train_schedule": self.config.get("schedule")}


@dataclass
class TrainConfig:
    steps: int = 3000
    batch_size: int = 16
    lr: float = 1e-3
    ema_decay: float = 0.995
    grad_clip: float = 1.0
    channels: tuple = (16, 32, 64, 128)
    n_val_draws: int = 4
    log_every: int = 100
    extra: dict = field(default_factory=dict)


def _stack(images):
    return torch.as_tensor(np.stack([np.asarray(im, dtype=np.complex64) for im in images]))


def epsilon_loss(net, x0, t_idx, noise, schedule):
    ab = torch.as_tensor(schedule.alpha_bar[t_idx - 1], dtype=torch.float32)
    xt = torch.sqrt(ab)[:, None, None] * x0 + torch.sqrt(1.0 - ab)[:, None, None] * noise
    pred = predict_eps(net, _to_channels(xt), ab, net.sigma_data)
    return torch.mean((pred - _to_channels(noise)) ** 2)


def _validation_set(images, schedule, n_draws, seed):
    g = torch.Generator().manual_seed(seed + 7919)
    x0 = _stack(images).repeat(n_draws, 1, 1)
    t_idx = torch.randint(1, schedule.T + 1, (x0.shape[0],), generator=g).numpy()
    noise = torch.complex(torch.randn(x0.shape, generator=g), torch.randn(x0.shape, generator=g))
    return x0, t_idx, noise


def validation_loss(net, val, schedule):
    x0, t_idx, noise = val
    with torch.no_grad():
        return float(epsilon_loss(net, x0, t_idx, noise, schedule))


def train_denoiser(dataset, schedule, config=None, seed=0, checkpoint=None):
    """Fit an epsilon-prediction network on the dataset's train split.

    Returns a :class:`DenoiserModel` using the EMA weights. The loss trace
    (one entry per step) and the initial/final validation epsilon-loss on
    the test split are attached to the model and to the checkpoint.
    """
    config = config or TrainConfig()
    train = dataset.train if hasattr(dataset, "train") else list(dataset)
    if not train:
        raise TrainingError("training split is empty")
    val_images = dataset.test if hasattr(dataset, "test") and dataset.test else train[:8]
    data = _stack(train)
    # per-component RMS of the clean data
    sigma_data = float(torch.sqrt(torch.mean(torch.abs(data) ** 2) / 2))
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        net = DenoiserNet(channels=config.channels, sigma_data=sigma_data)
    ema = DenoiserNet(channels=config.channels, sigma_data=sigma_data)
    ema.load_state_dict(net.state_dict())
    for p in ema.parameters():
        p.requires_grad_(False)
    val = _validation_set(val_images, schedule, config.n_val_draws, seed)
    initial_val = validation_loss(net, val, schedule)
    g = torch.Generator().manual_seed(seed)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    warm = max(1, config.steps // 20)
    sched = torch.optim.lr_scheduler.LambdaLR(
        opt, lambda s: min(1.0, (s + 1) / warm) * (0.1 + 0.9 * 0.5 * (1 + math.cos(math.pi * s / config.steps)))
    )
    trace = []
    for step in range(config.steps):
        idx = torch.randint(0, data.shape[0], (config.batch_size,), generator=g)
        x0 = data[idx]
        flips = torch.rand(2, generator=g)
        if flips[0] < 0.5:
            x0 = torch.flip(x0, dims=(-1,))
        if flips[1] < 0.5:
            x0 = torch.flip(x0, dims=(-2,))
        t_idx = torch.randint(1, schedule.T + 1, (config.batch_size,), generator=g).numpy()
        noise = torch.complex(torch.randn(x0.shape, generator=g), torch.randn(x0.shape, generator=g))
        loss = epsilon_loss(net, x0, t_idx, noise, schedule)
        if not torch.isfinite(loss):
            raise TrainingError(f"denoiser loss became {loss.item()}", step=step)
        opt.zero_grad()
        loss.backward()
        nn.utils.clip_grad_norm_(net.parameters(), config.grad_clip)
        opt.step()
        sched.step()
        with torch.no_grad():
            for pe, p in zip(ema.parameters(), net.parameters()):
                pe.mul_(config.ema_decay).add_(p, alpha=1.0 - config.ema_decay)
            for be, b in zip(ema.buffers(), net.buffers()):
                be.copy_(b)
        trace.append(loss.item())
        if config.log_every and step % config.log_every == 0:
            log.info("step %d loss %.5f", step, trace[-1])
    final_val = validation_loss(ema, val, schedule)
    cfg = asdict(config)
    cfg["channels"] = list(config.channels)
    cfg["seed"] = seed
    cfg["schedule"] = schedule.to_dict()
    model = DenoiserModel(ema, schedule, cfg, trace, {"initial": initial_val, "final": final_val})
    if checkpoint is not None:
        save_denoiser(model, checkpoint)
    return model


def save_denoiser(model, directory):
    """Write ``model.json`` plus one ct1 tensor per weight array."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for name, tensor in model.net.state_dict().items():
        fname = name.replace(".", "_") + ".ct1"
        save_tensor(directory / fname, tensor.detach().cpu().numpy())
        names.append({"name": name, "file": fname})
    header = {
        "format": "mrilab-denoiser/1",
        "arch": model.net.arch(),
        "schedule": model.schedule.to_dict(),
        "config": model.config,
        "val_loss": model.val_loss,
        "loss_trace": model.loss_trace,
        "tensors": names,
    }
    tmp = directory / "model.json.tmp"
    tmp.write_text(json.dumps(header))
    tmp.replace(directory / "model.json")
    return directory


def load_denoiser(directory, schedule=None):
    directory = Path(directory)
    path = directory / "model.json"
    if not path.is_file():
        raise TensorIOError(f"no denoiser checkpoint at {directory}")
    try:
        header = json.loads(path.read_text())
        arch = header["arch"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise TensorIOError(f"malformed checkpoint header {path}: {exc}") from exc
    net = DenoiserNet(
        channels=tuple(arch["channels"]),
        emb_dim=arch["emb_dim"],
        in_channels=arch["in_channels"],
        sigma_data=arch.get("sigma_data", 0.5),
    )
    state = {}
    for rec in header["tensors"]:
        state[rec["name"]] = torch.from_numpy(load_tensor(directory / rec["file"]))
    try:
        net.load_state_dict(state)
    except RuntimeError as exc:
        raise TensorIOError(f"checkpoint {directory} does not match its architecture: {exc}") from exc
    train_schedule = NoiseSchedule.from_dict(header["schedule"])
    return DenoiserModel(
        net, schedule or train_schedule, header.get("config"), header.get("loss_trace"), header.get("val_loss")
    )
