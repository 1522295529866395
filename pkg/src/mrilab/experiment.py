"""Grid experiments: simulate, reconstruct, evaluate and persist each cell.

A config (JSON) lists phantoms, masks and methods; every combination is one
cell stored under ``out/cells/<hash>/``. Cells whose ``metrics.json`` already
exists are reused, so rerunning an experiment is idempotent.
"""

import hashlib
import json
import logging
import math
from pathlib import Path

import numpy as np

from .diffusion import GMMScoreModel, load_denoiser, make_vp_schedule, parse_gmm_spec
from .errors import ConfigurationError, MRILabError, TensorIOError
from .forward_model import add_noise, apply_adjoint, apply_forward, make_mask
from .metrics import error_map, psnr, ssim
from .phantom_data import PhantomSpec, make_phantom, simulate_coils
from .samplers import SamplerConfig, reconstruct
from .tensorio import save_tensor

log = logging.getLogger(__name__)


def load_model(spec, shape, schedule):
    """Resolve a model spec: ``gmm:unit``, ``gmm:K,var,seed``, ``desk`` or a checkpoint directory."""
    spec = str(spec)
    if spec.startswith("gmm:"):
        return GMMScoreModel(parse_gmm_spec(spec[4:], shape), schedule)
    if spec == "desk":
        from .presets import desk_denoiser

        return desk_denoiser(schedule, train_if_missing=False)
    path = Path(spec)
    if not (path / "model.json").is_file():
        raise TensorIOError(f"no model checkpoint at {path}")
    return load_denoiser(path, schedule)


def _json_ready(value):
    if isinstance(value, float) and math.isinf(value):
        return "identical"
    return value


def _write_json(path, obj):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=1, sort_keys=True))
    tmp.replace(path)


def cell_key(cell):
    blob = json.dumps(cell, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def expand_cells(config):
    try:
        phantoms, masks, methods = config["phantoms"], config["masks"], config["methods"]
    except KeyError as exc:
        raise ConfigurationError(f"experiment config is missing {exc}") from exc
    shared = {
        "coils": config.get("coils", {"J": 1, "seed": 0}),
        "sigma": float(config.get("sigma", 0.0)),
        "noise_seed": int(config.get("noise_seed", 0)),
        "model": config.get("model", "desk"),
        "sampler": config.get("sampler", {}),
    }
    cells = []
    for ph in phantoms:
        for mk in masks:
            for method in methods:
                cells.append({"phantom": ph, "mask": mk, "method": method, **shared})
    return cells


class _Models:
    def __init__(self):
        self._cache = {}

    def get(self, spec, shape, T):
        key = (spec, tuple(shape), T)
        if key not in self._cache:
            schedule = make_vp_schedule(T)
            self._cache[key] = (load_model(spec, shape, schedule), schedule)
        return self._cache[key]


def run_cell(cell, directory, models, scale=5):
    ph = cell["phantom"]
    spec = PhantomSpec(ph.get("kind", "random_ellipses"), tuple(ph.get("size", (64, 64))), ph.get("seed", 0), ph.get("phase", "zero"))
    truth = make_phantom(spec)
    mk = cell["mask"]
    mask = make_mask(mk["pattern"], spec.size, mk.get("R", 1.0), mk.get("acs", 0), mk.get("seed", 0))
    coils = simulate_coils(cell["coils"].get("J", 1), spec.size, cell["coils"].get("seed", 0))
    y = add_noise(apply_forward(truth, coils, mask), cell["sigma"], cell["noise_seed"])
    zero_filled = apply_adjoint(y, coils)

    scfg = dict(cell["sampler"])
    scfg["method"] = cell["method"]
    cfg = SamplerConfig.from_dict(scfg)
    model, schedule = models.get(cell["model"], spec.size, cfg.T)
    result = reconstruct(y, coils, mask, model, schedule, cfg)

    directory.mkdir(parents=True, exist_ok=True)
    result.save(directory / "recon.ct1")
    save_tensor(directory / "truth.ct1", truth)
    error_map(result.image, truth, scale, directory / "error.png")
    return {
        "psnr": _json_ready(psnr(result.image, truth)),
        "ssim": ssim(result.image, truth),
        "zero_filled_psnr": _json_ready(psnr(zero_filled, truth)),
        "final_residual": result.final_residual,
        "R_eff": mask.R_eff,
    }


def _aggregate(rows):
    out = {}
    for method in sorted({r["method"] for r in rows}):
        ok = [r for r in rows if r["method"] == method and r["status"] == "ok"]
        stats = {"n": len(ok)}
        for key in ("psnr", "ssim"):
            vals = [r[key] for r in ok if isinstance(r[key], (int, float))]
            stats[f"{key}_mean"] = float(np.mean(vals)) if vals else None
            stats[f"{key}_std"] = float(np.std(vals)) if vals else None
        out[method] = stats
    return out


def run_experiment(config_path, out_dir):
    """Run (or resume) every cell of the experiment and write ``report.json``."""
    config_path = Path(config_path)
    if not config_path.is_file():
        raise TensorIOError(f"missing experiment config {config_path}")
    text = config_path.read_text()
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed experiment config {config_path}: {exc}") from exc
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scale = config.get("error_map_scale", 5)
    models = _Models()
    rows = []
    computed = 0
    for cell in expand_cells(config):
        key = cell_key(cell)
        cdir = out_dir / "cells" / key
        row = {
            "cell": key,
            "phantom": cell["phantom"],
            "method": cell["method"],
            "pattern": cell["mask"]["pattern"],
            "R": cell["mask"].get("R", 1.0),
            "acs": cell["mask"].get("acs", 0),
            "seed": cell["sampler"].get("seed", 0),
        }
        done = cdir / "metrics.json"
        if done.is_file():
            metrics = json.loads(done.read_text())
        else:
            try:
                metrics = run_cell(cell, cdir, models, scale)
                metrics["status"] = "ok"
                computed += 1
            except (MRILabError, OSError) as exc:
                log.warning("cell %s failed: %s", key, exc)
                metrics = {"status": "failed", "error": str(exc), "psnr": None, "ssim": None}
            if metrics["status"] == "ok":
                _write_json(done, metrics)
        row.update(metrics)
        rows.append(row)
    report = {"config_text": text, "rows": rows, "aggregate": _aggregate(rows)}
    _write_json(out_dir / "report.json", report)
    log.info("experiment finished: %d cells, %d computed", len(rows), computed)
    return report
