"""Grid search for the DiffINR data-consistency learning rate on the desk setup.

Writes benchmarks/dc_lr_search.json. The CLI keeps its 1e-5 default;
the chosen value becomes ``mrilab.presets.DESK_INR["dc_lr"]``.
"""

import argparse
import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from _tuning import desk_model, tuning_cases, zero_filled_psnr
from mrilab import presets
from mrilab.inr import INRConfig
from mrilab.metrics import psnr
from mrilab.samplers import SamplerConfig, diffinr_sample

GRID = [1e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2, help="tuning phantoms")
    ap.add_argument("--out", default=str(Path(__file__).with_name("dc_lr_search.json")))
    args = ap.parse_args()
    model, schedule = desk_model()
    cases = tuning_cases(args.n)
    rows = []
    for lr in GRID:
        inr = replace(INRConfig(), dc_lr=lr)
        cfg = SamplerConfig(**presets.DESK_SAMPLER, method="diffinr", seed=0, record_trace=False, inr=inr)
        t0 = time.perf_counter()
        scores = [psnr(diffinr_sample(y, coils, mask, model, schedule, cfg).image, img) for img, coils, mask, y in cases]
        rows.append({"dc_lr": lr, "psnr": scores, "mean_psnr": float(np.mean(scores)), "seconds": time.perf_counter() - t0})
        print(f"dc_lr {lr:<7g} mean PSNR {rows[-1]['mean_psnr']:.2f} dB ({rows[-1]['seconds']:.0f} s)", flush=True)
    best = max(rows, key=lambda r: r["mean_psnr"])
    report = {
        "setup": {"sampler": presets.DESK_SAMPLER, "acquisition": presets.DESK_ACQ, "phantoms": f"train split [0:{args.n}]"},
        "zero_filled_psnr": [zero_filled_psnr(img, coils, y) for img, coils, _, y in cases],
        "grid": rows,
        "best_dc_lr": best["dc_lr"],
    }
    Path(args.out).write_text(json.dumps(report, indent=1))
    print(f"best dc_lr {best['dc_lr']}")


if __name__ == "__main__":
    main()
