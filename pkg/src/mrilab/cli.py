"""``mrilab`` command-line interface."""

import json
import logging
import math
import sys
from pathlib import Path

import click
import numpy as np

from .errors import MRILabError
from .tensorio import load_tensor, save_tensor

DEFAULTS = {"T": 2000, "t_star": 1200, "k": 50, "prior_iters": 250, "dc_iters": 250, "prior_lr": 1e-3, "dc_lr": 1e-5}


def _run(fn):
    try:
        return fn()
    except MRILabError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Simulated under-sampled MRI and diffusion posterior sampling."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--kind", type=click.Choice(["shepp_logan", "random_ellipses", "smooth_blobs"]), default="shepp_logan")
@click.option("--size", nargs=2, type=int, default=(64, 64))
@click.option("--seed", type=int, default=0)
@click.option("--phase", type=click.Choice(["zero", "smooth", "smooth_random"]), default="zero")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def phantom(kind, size, seed, phase, out):
    """Write a synthetic complex phantom."""
    from .phantom_data import PhantomSpec, make_phantom

    spec = _run(lambda: PhantomSpec(kind, size, seed, phase))
    save_tensor(out, make_phantom(spec), meta=spec.record())


@main.command()
@click.option("--pattern", type=click.Choice(["random1d", "gaussian1d", "gaussian2d", "poisson2d", "partial_fourier"]), required=True)
@click.option("--size", nargs=2, type=int, default=(64, 64))
@click.option("--R", "R", type=float, default=4.0)
@click.option("--acs", type=int, default=8)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def mask(pattern, size, R, acs, seed, out):
    """Write an under-sampling mask (u1) with its generation parameters."""
    from .forward_model import make_mask

    m = _run(lambda: make_mask(pattern, size, R, acs, seed))
    save_tensor(out, m.keep, meta={**m.meta(), "R_eff": m.R_eff})
    click.echo(f"kept {m.n_kept} of {m.keep.size} entries, R_eff = {m.R_eff:.4f}")


@main.command()
@click.option("--J", "J", type=int, default=1)
@click.option("--size", nargs=2, type=int, default=(64, 64))
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def coils(J, size, seed, out):
    """Write simulated SOS-normalised coil sensitivity maps."""
    from .phantom_data import simulate_coils

    c = _run(lambda: simulate_coils(J, size, seed))
    save_tensor(out, c.maps)


def _load_mask(path):
    from .forward_model import SamplingMask

    keep, meta = load_tensor(path, with_meta=True)
    return SamplingMask.from_array(keep, meta)


def _load_coils(path):
    from .forward_model import CoilSensitivities

    return CoilSensitivities(load_tensor(path))


@main.command()
@click.option("--image", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--coils", "coils_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--sigma", type=float, default=0.0)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def simulate(image, coils_path, mask_path, sigma, seed, out):
    """Simulate multi-coil under-sampled k-space."""
    from .forward_model import add_noise, apply_forward

    def go():
        m = _load_mask(mask_path)
        y = add_noise(apply_forward(load_tensor(image), _load_coils(coils_path), m), sigma, seed)
        save_tensor(out, y.data, meta={"mask": m.meta(), "sigma": sigma, "seed": seed})

    _run(go)


@main.command()
@click.option("--n-train", type=int, default=1000)
@click.option("--n-test", type=int, default=10)
@click.option("--kind", type=click.Choice(["shepp_logan", "random_ellipses", "smooth_blobs"]), default="random_ellipses")
@click.option("--size", nargs=2, type=int, default=(64, 64))
@click.option("--phase", type=click.Choice(["zero", "smooth", "smooth_random"]), default="smooth")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def dataset(n_train, n_test, kind, size, phase, seed, out):
    """Write a phantom dataset (images + manifest.json) for train-denoiser."""
    from .phantom_data import PhantomSpec, build_dataset, save_dataset

    ds = _run(lambda: build_dataset(n_train, n_test, PhantomSpec(kind, size, 0, phase), seed))
    save_dataset(ds, out)


@main.command("train-denoiser")
@click.option("--data", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--T", "T", type=int, default=1000)
@click.option("--beta-min", type=float, default=None, help="Default 0.1 / T.")
@click.option("--beta-max", type=float, default=None, help="Default 20 / T.")
@click.option("--steps", type=int, default=3000)
@click.option("--batch-size", type=int, default=16)
@click.option("--lr", type=float, default=1e-3)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def train_denoiser_cmd(data, T, beta_min, beta_max, steps, batch_size, lr, seed, out):
    """Train the toy epsilon-prediction denoiser and write a checkpoint."""
    from .diffusion import TrainConfig, make_vp_schedule, train_denoiser
    from .phantom_data import load_dataset

    def go():
        schedule = make_vp_schedule(T, beta_min, beta_max)
        model = train_denoiser(load_dataset(data), schedule, TrainConfig(steps=steps, batch_size=batch_size, lr=lr), seed, out)
        click.echo(json.dumps(model.val_loss))

    _run(go)


@main.command()
@click.option("--method", type=click.Choice(["diffinr", "dps", "projection"]), default="diffinr")
@click.option("--y", "y_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--coils", "coils_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model", "model_spec", required=True, help="Checkpoint directory, 'desk', or gmm:unit / gmm:K,var,seed.")
@click.option("--T", "T", type=int, default=DEFAULTS["T"])
@click.option("--t-star", type=int, default=DEFAULTS["t_star"])
@click.option("--k", type=int, default=DEFAULTS["k"])
@click.option("--inr-iters-prior", type=int, default=DEFAULTS["prior_iters"])
@click.option("--inr-iters-dc", type=int, default=DEFAULTS["dc_iters"])
@click.option("--lr-prior", type=float, default=DEFAULTS["prior_lr"])
@click.option("--lr-dc", type=float, default=DEFAULTS["dc_lr"])
@click.option("--dps-zeta", type=float, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--trace/--no-trace", default=False)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def recon(method, y_path, mask_path, coils_path, model_spec, T, t_star, k, inr_iters_prior, inr_iters_dc, lr_prior, lr_dc, dps_zeta, seed, trace, out):
    """Reconstruct an image from simulated k-space."""
    from .diffusion import make_vp_schedule
    from .experiment import load_model
    from .inr import INRConfig
    from .samplers import DEFAULT_DPS_ZETA, SamplerConfig, reconstruct

    def go():
        inr = INRConfig(prior_iters=inr_iters_prior, prior_lr=lr_prior, dc_iters=inr_iters_dc, dc_lr=lr_dc)
        cfg = SamplerConfig(
            T=T, t_star=t_star, k=k, method=method, seed=seed, record_trace=trace, inr=inr,
            dps_zeta=DEFAULT_DPS_ZETA if dps_zeta is None else dps_zeta,
        )
        cfg.validate()
        m = _load_mask(mask_path)
        c = _load_coils(coils_path)
        schedule = make_vp_schedule(T)
        model = load_model(model_spec, m.shape, schedule)
        result = reconstruct(load_tensor(y_path), c, m, model, schedule, cfg)
        result.save(out)
        click.echo(f"final k-space residual (L1) {result.final_residual:.6g}")

    _run(go)


@main.command("eval")
@click.option("--recon", "recon_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--ref", "ref_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--metrics", default="psnr,ssim")
@click.option("--error-map-scale", type=int, default=None, help="Write an error map PNG next to the report (5 or 10 are the usual presets).")
@click.option("--report", type=click.Path(dir_okay=False), required=True)
def eval_cmd(recon_path, ref_path, metrics, error_map_scale, report):
    """Compare a reconstruction with a reference image."""
    from .metrics import error_map, psnr, ssim

    def go():
        x, ref = load_tensor(recon_path), load_tensor(ref_path)
        out = {"recon": str(recon_path), "ref": str(ref_path)}
        for name in [m.strip() for m in metrics.split(",") if m.strip()]:
            if name == "psnr":
                value = psnr(x, ref)
                out["psnr"] = "identical" if math.isinf(value) else value
            elif name == "ssim":
                out["ssim"] = ssim(x, ref)
            else:
                raise click.BadParameter(f"unknown metric {name!r}", param_hint="--metrics")
        if error_map_scale is not None:
            png = Path(report).with_suffix(".error.png")
            error_map(x, ref, error_map_scale, png)
            out["error_map"] = str(png)
        Path(report).parent.mkdir(parents=True, exist_ok=True)
        Path(report).write_text(json.dumps(out, indent=1))
        click.echo(json.dumps(out))

    _run(go)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def experiment(config_path, out):
    """Run or resume a grid experiment described by a JSON config."""
    from .experiment import run_experiment

    report = _run(lambda: run_experiment(config_path, out))
    click.echo(json.dumps(report["aggregate"], indent=1))


if __name__ == "__main__":
    sys.exit(main())
