"""Acceptance checks, one test per criterion.

Every check prints a ``criterion N: PASS|FAIL | ...`` line (repeated in the
terminal summary). Each check is a pure function of fixed seeds returning a
report dict, so the reproducibility check can rerun them and compare the
serialised reports byte for byte. Wall times are printed but kept out of the
reports.
"""

import json
import math
import time

import numpy as np
import pytest
import torch

from mrilab import presets
from mrilab.diffusion import GMMPrior, GMMScoreModel, ancestral_step, make_vp_schedule, randn_like, tweedie_denoise
from mrilab.forward_model import (
    SamplingMask,
    TorchOperator,
    apply_adjoint,
    apply_forward,
    fft2c,
    make_mask,
)
from mrilab.inr import INRConfig, INRField, dc_loss, dc_refine, make_grid, prior_embed, prior_loss
from mrilab.metrics import psnr
from mrilab.phantom_data import PhantomSpec, make_phantom, simulate_coils
from mrilab.samplers import diffinr_sample, dps_sample

from .test_diffusion import _np_gmm_logpdf, _np_gmm_posterior_mean, _small_prior


def _crandn(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _inner(a, b):
    return np.vdot(b, a)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# 1. operator suite


def c1_operators():
    rng = np.random.default_rng(1)
    adj = []
    for i in range(100):
        h, w = 16, 16
        J = int(rng.integers(1, 6))
        coils = simulate_coils(J, (h, w), i)
        keep = (rng.random((h, w)) < rng.uniform(0.1, 0.9)).astype(np.uint8)
        mask = SamplingMask.from_array(keep, {"pattern": "custom"})
        x = _crandn(rng, (h, w))
        y = _crandn(rng, (J, h, w)) * keep
        ax = apply_forward(x, coils, mask).data
        lhs = _inner(ax, y)
        rhs = _inner(x, apply_adjoint(y, coils, mask))
        adj.append(abs(lhs - rhs) / (np.linalg.norm(ax) * np.linalg.norm(y)))
    pars = []
    for _ in range(20):
        x = _crandn(rng, tuple(int(n) for n in rng.integers(4, 64, size=2)))
        e = np.sum(np.abs(x) ** 2)
        pars.append(abs(np.sum(np.abs(fft2c(x)) ** 2) - e) / e)
    masks = {}
    shape = (320, 320)
    cases = [(p, R) for p in ("random1d", "gaussian1d", "gaussian2d", "poisson2d") for R in (4.0, 8.0)]
    cases += [("gaussian2d", 15.0), ("poisson2d", 18.0)]
    for pattern, R in cases:
        m = make_mask(pattern, shape, R, 12, 0)
        c = shape[0] // 2
        lo = c - 6
        acs = m.keep[lo : lo + 12, lo : lo + 12] if "2d" in pattern else m.keep[:, c - 6 : c + 6]
        masks[f"{pattern} R={R:g}"] = {"R_eff": m.R_eff, "rel_err": abs(m.R_eff - R) / R, "acs_full": bool(acs.all())}
    pf = make_mask("partial_fourier", shape, 2.0, 12, 0)
    masks["partial_fourier"] = {"R_eff": pf.R_eff, "rel_err": abs(pf.R_eff - 2.0) / 2.0, "acs_full": bool(pf.keep[:, 154:166].all())}
    lines = int(make_mask("random1d", shape, 8.0, 12, 0).keep.any(axis=0).sum())
    report = {"adjoint_max_rel": max(adj), "parseval_max_rel": max(pars), "masks": masks, "random1d_R8_lines": lines}
    ok = (
        report["adjoint_max_rel"] <= 1e-5
        and report["parseval_max_rel"] <= 1e-6
        and all(v["acs_full"] and v["rel_err"] <= 0.05 for v in masks.values())
        and lines == 40
    )
    detail = (
        f"adjoint {report['adjoint_max_rel']:.1e}, Parseval {report['parseval_max_rel']:.1e}, "
        f"worst mask R error {max(v['rel_err'] for v in masks.values()):.3f}, R=8 lines {lines}/320"
    )
    return report, ok, detail, 10.0


# 2. diffusion oracle suite


def c2_diffusion():
    rng = np.random.default_rng(2)
    schedule = make_vp_schedule(100)
    w, mu, s2, prior = _small_prior(rng)
    model = GMMScoreModel(prior, schedule)
    fd_err, tw_err, id_err = 0.0, 0.0, 0.0
    h = 1e-6
    for _ in range(50):
        t = int(rng.integers(1, 101))
        ab = schedule.alpha_bar_at(t)
        x = _crandn(rng, (4, 4)) * 1.5
        xt = torch.tensor(x)
        score = model.score(xt, t).numpy()
        i, j = rng.integers(0, 4, size=2)
        for unit in (1.0, 1j):
            e = np.zeros_like(x)
            e[i, j] = unit * h
            fd = (_np_gmm_logpdf(x + e, ab, w, mu, s2)[0] - _np_gmm_logpdf(x - e, ab, w, mu, s2)[0]) / (2 * h)
            got = score[i, j].real if unit == 1.0 else score[i, j].imag
            fd_err = max(fd_err, abs(got - fd) / max(1.0, abs(fd)))
        want = _np_gmm_posterior_mean(x, ab, w, mu, s2)
        tw_err = max(tw_err, float(np.max(np.abs(tweedie_denoise(xt, t, model, schedule).numpy() - want))))
        lhs = model.eps(xt, t)
        rhs = -math.sqrt(1 - ab) * model.score(xt, t)
        id_err = max(id_err, float(torch.max(torch.abs(lhs - rhs))))
    T = 100
    s = make_vp_schedule(T)
    unit = GMMScoreModel(GMMPrior.unit((8, 8)), s)
    g = torch.Generator().manual_seed(0)
    x = randn_like(torch.zeros((500, 8, 8), dtype=torch.complex128), g)
    for t in range(T, 0, -1):
        x = ancestral_step(x, t, unit, s, randn_like(x, g))
    parts = torch.stack([x.real, x.imag])
    mean, var = parts.mean().item(), parts.var().item()
    report = {"score_fd_rel": fd_err, "tweedie_abs": tw_err, "eps_score_abs": id_err, "chain_mean": mean, "chain_var": var}
    ok = fd_err <= 1e-4 and tw_err <= 1e-5 and id_err <= 1e-6 and abs(mean) <= 0.05 and abs(var - 1) <= 0.1
    detail = f"score FD {fd_err:.1e}, Tweedie {tw_err:.1e}, eps/score {id_err:.1e}, chain mean {mean:+.4f} var {var:.4f}"
    return report, ok, detail, 120.0


# 3. INR gradient suite


def _fd_errors(field_, loss_fn, rng, n=24, h=1e-6):
    loss = loss_fn()
    field_.zero_grad()
    loss.backward()
    params = [field_.table] + list(field_.mlp_re.parameters()) + list(field_.mlp_im.parameters())
    errs = []
    for k in range(n):
        p = params[k % len(params)]
        flat, grad = p.data.view(-1), p.grad.view(-1)
        nz = torch.nonzero(grad).view(-1)
        i = int(nz[rng.integers(len(nz))]) if len(nz) else int(rng.integers(flat.numel()))
        old = flat[i].item()
        with torch.no_grad():
            flat[i] = old + h
            up = loss_fn().item()
            flat[i] = old - h
            down = loss_fn().item()
            flat[i] = old
        fd = (up - down) / (2 * h)
        errs.append(abs(fd - grad[i].item()) / max(1.0, abs(fd)))
    return errs


def c3_inr_gradients():
    rng = np.random.default_rng(3)
    cfg = INRConfig(dtype="float64", init_scale=0.1)
    g = make_grid((16, 16))
    f1 = INRField((16, 16), cfg, seed=1)
    target = torch.tensor(_crandn(rng, (16, 16)))
    e1 = _fd_errors(f1, lambda: prior_loss(f1, g, target), rng)
    f2 = INRField((16, 16), cfg, seed=2)
    coils = simulate_coils(3, (16, 16), 0)
    mask = make_mask("random1d", (16, 16), 2, 4, 0)
    op = TorchOperator(coils, mask, dtype=torch.complex128)
    y = torch.tensor(apply_forward(_crandn(rng, (16, 16)), coils, mask).data)
    e2 = _fd_errors(f2, lambda: dc_loss(f2, g, y, op), rng)
    report = {"prior_max_rel": max(e1), "dc_max_rel": max(e2), "n_params": [len(e1), len(e2)]}
    ok = max(e1) <= 1e-3 and max(e2) <= 1e-3 and min(len(e1), len(e2)) >= 20
    return report, ok, f"prior-loss {max(e1):.1e}, DC-loss {max(e2):.1e} over {len(e1)}+{len(e2)} parameters", 60.0


# 4. INR capability


def c4_inr_capability():
    img = make_phantom(PhantomSpec("shepp_logan", (64, 64), 0, "zero"))
    f, losses = prior_embed(img, INRConfig(prior_iters=250), seed=0)
    with torch.no_grad():
        out = f(make_grid((64, 64))).numpy()
    value = psnr(out, img)
    report = {"psnr": value, "iters": len(losses) - 1, "final_mse": losses[-1]}
    return report, value >= 35.0 and len(losses) - 1 == 250, f"{value:.2f} dB after {len(losses) - 1} iterations", 120.0


# 5. DC behaviour on the acceptance cells


def _acceptance_cells():
    ds = presets.desk_dataset()
    cells = []
    for i, img in enumerate(ds.test[:5]):
        for R in (4.0, 8.0):
            cells.append((f"test{i} R={R:g}", img, R))
    cells.append(("smoke R=1", presets.smoke_phantom(), 1.0))
    return cells


def c5_dc_behaviour():
    rng = np.random.default_rng(5)
    cfg = INRConfig(prior_iters=50, **presets.DESK_INR)
    rows = {}
    for name, img, R in _acceptance_cells():
        coils, mask, y = presets.desk_problem(img, R=R)
        grid = make_grid(img.shape)
        start, _ = prior_embed(apply_adjoint(y, coils), cfg, seed=0, grid=grid)
        op = TorchOperator(coils, mask)
        _, losses = dc_refine(start, y, coils, mask, cfg, grid=grid, op=op)
        data = torch.as_tensor(y.data).to(torch.complex64)
        noisy = data + torch.tensor(_crandn(rng, data.shape)).to(torch.complex64) * (~op.sampled)
        with torch.no_grad():
            same = dc_loss(start, grid, data, op).item() == dc_loss(start, grid, noisy, op).item()
        rows[name] = {"initial": losses[0], "final": losses[-1], "unsampled_invariant": same}
    ok = all(r["final"] < r["initial"] and r["unsampled_invariant"] for r in rows.values())
    worst = max(r["final"] / r["initial"] for r in rows.values())
    return {"cells": rows}, ok, f"{len(rows)} cells, worst final/initial residual {worst:.3f}, unsampled perturbation invariant", 120.0


# 6. end-to-end scaled reconstruction


def c6_end_to_end():
    model, schedule = _desk_model()
    ds = presets.desk_dataset()
    rows = []
    for i, img in enumerate(ds.test[:5]):
        coils, mask, y = presets.desk_problem(img)
        inr = diffinr_sample(y, coils, mask, model, schedule, presets.desk_sampler_config("diffinr", seed=i))
        dps = dps_sample(y, coils, mask, model, schedule, presets.desk_sampler_config("dps", seed=i))
        rows.append(
            {
                "diffinr": psnr(inr.image, img),
                "dps": psnr(dps.image, img),
                "zero_filled": psnr(apply_adjoint(y, coils), img),
                "diffinr_residual": inr.final_residual,
                "dps_residual": dps.final_residual,
                "dps_residual_start": dps.diagnostics[0]["residual"],
            }
        )
    mean = {k: float(np.mean([r[k] for r in rows])) for k in ("diffinr", "dps", "zero_filled")}
    report = {"rows": rows, "mean": mean, "margin_over_dps": mean["diffinr"] - mean["dps"]}
    ok = mean["diffinr"] >= mean["zero_filled"] + 5.0 and mean["diffinr"] >= mean["dps"]
    detail = (
        f"DiffINR {mean['diffinr']:.2f} dB, DPS {mean['dps']:.2f} dB, zero-filled {mean['zero_filled']:.2f} dB "
        f"(need >= {mean['zero_filled'] + 5:.2f} and >= DPS; margin over DPS {report['margin_over_dps']:+.2f} dB)"
    )
    return report, ok, detail, 3 * 3600.0


# 7. full-data sanity


def c7_full_data():
    model, schedule = _desk_model()
    img = presets.smoke_phantom()
    coils, mask, y = presets.desk_problem(img, R=1.0)
    res = diffinr_sample(y, coils, mask, model, schedule, presets.desk_sampler_config("diffinr", seed=0))
    value = psnr(res.image, img)
    report = {"psnr": value, "R_eff": mask.R_eff}
    return report, value >= 40.0, f"DiffINR {value:.2f} dB at R_eff {mask.R_eff:g}", 600.0


_MODEL = {}


def _desk_model():
    if "m" not in _MODEL:
        schedule = make_vp_schedule(presets.DESK_SAMPLER["T"])
        _MODEL["m"] = (presets.desk_denoiser(schedule), schedule)
    return _MODEL["m"]


CHECKS = {
    1: ("operator suite", c1_operators),
    2: ("diffusion oracle suite", c2_diffusion),
    3: ("INR gradient suite", c3_inr_gradients),
    4: ("INR capability", c4_inr_capability),
    5: ("DC behaviour", c5_dc_behaviour),
    6: ("end-to-end scaled reconstruction", c6_end_to_end),
    7: ("full-data sanity", c7_full_data),
}
_FIRST = {}


def _run(n):
    name, fn = CHECKS[n]
    (report, ok, detail, budget), secs = _timed(fn)
    _FIRST.setdefault(n, report)
    return report, ok, detail, budget, secs


def _check(n, criterion):
    report, ok, detail, budget, secs = _run(n)
    fast = secs <= budget
    criterion(f"criterion {n} ({CHECKS[n][0]})", ok and fast, f"{detail}; {secs:.1f} s (budget {budget:.0f} s)")
    assert ok, detail
    assert fast, f"took {secs:.1f} s, budget {budget:.0f} s"
    return report


def test_criterion_1_operator_suite(criterion):
    _check(1, criterion)


def test_criterion_2_diffusion_oracles(criterion):
    _check(2, criterion)


def test_criterion_3_inr_gradients(criterion):
    _check(3, criterion)


def test_criterion_4_inr_capability(criterion):
    _check(4, criterion)


def test_criterion_5_dc_behaviour(criterion):
    _check(5, criterion)


@pytest.mark.slow
def test_criterion_6_end_to_end(criterion):
    report = _check(6, criterion)
    # data-consistency dominance at R = 4 comes for free from the same runs
    rows = report["rows"]
    dominant = all(r["diffinr_residual"] <= r["dps_residual"] for r in rows)
    criterion("invariant DC dominance R=4", dominant, ", ".join(f"{r['diffinr_residual']:.3g}<={r['dps_residual']:.3g}" for r in rows))
    endpoint = all(r["dps_residual"] < r["dps_residual_start"] for r in rows)
    criterion("DPS residual endpoint R=4", endpoint, "final k-space residual below the t=T residual on every phantom")
    assert dominant and endpoint


@pytest.mark.slow
def test_dc_dominance_r8(criterion):
    model, schedule = _desk_model()
    rows = []
    for i, img in enumerate(presets.desk_dataset().test[:5]):
        coils, mask, y = presets.desk_problem(img, R=8.0)
        a = diffinr_sample(y, coils, mask, model, schedule, presets.desk_sampler_config("diffinr", seed=i))
        b = dps_sample(y, coils, mask, model, schedule, presets.desk_sampler_config("dps", seed=i))
        rows.append((a.final_residual, b.final_residual, b.diagnostics[0]["residual"]))
    dominant = all(a <= b for a, b, _ in rows)
    endpoint = all(b < b0 for _, b, b0 in rows)
    criterion("invariant DC dominance R=8", dominant, ", ".join(f"{a:.3g}<={b:.3g}" for a, b, _ in rows))
    criterion("DPS residual endpoint R=8", endpoint, "final k-space residual below the t=T residual on every phantom")
    assert dominant and endpoint


def test_criterion_7_full_data(criterion):
    _check(7, criterion)


@pytest.mark.slow
def test_criterion_8_reproducibility(criterion):
    mismatched = []
    for n in CHECKS:
        if n not in _FIRST:
            _run(n)
        first = json.dumps(_FIRST[n], sort_keys=True)
        (again, *_rest) = CHECKS[n][1]()
        if json.dumps(again, sort_keys=True) != first:
            mismatched.append(n)
    ok = not mismatched
    criterion("criterion 8 (reproducibility)", ok, "criteria 1-7 rerun: reports byte-identical" if ok else f"reports differ for {mismatched}")
    assert ok
