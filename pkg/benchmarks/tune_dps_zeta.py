"""One-dimensional grid search for the DPS guidance step on the desk setup.

Writes benchmarks/dps_zeta_search.json; the best value is copied into
``mrilab.samplers.DEFAULT_DPS_ZETA`` by hand.
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from _tuning import desk_model, tuning_cases, zero_filled_psnr
from mrilab import presets
from mrilab.metrics import psnr
from mrilab.samplers import SamplerConfig, dps_sample

GRID = [0.01, 0.03, 0.1, 0.2, 0.3, 0.5, 0.7, 0.85, 1.0, 3.0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2, help="tuning phantoms")
    ap.add_argument("--out", default=str(Path(__file__).with_name("dps_zeta_search.json")))
    args = ap.parse_args()
    model, schedule = desk_model()
    cases = tuning_cases(args.n)
    rows = []
    for zeta in GRID:
        cfg = SamplerConfig(**presets.DESK_SAMPLER, method="dps", dps_zeta=zeta, seed=0, record_trace=False)
        t0 = time.perf_counter()
        scores = [psnr(dps_sample(y, coils, mask, model, schedule, cfg).image, img) for img, coils, mask, y in cases]
        rows.append({"zeta": zeta, "psnr": scores, "mean_psnr": float(np.mean(scores)), "seconds": time.perf_counter() - t0})
        print(f"zeta {zeta:<6} mean PSNR {rows[-1]['mean_psnr']:.2f} dB")
    finite = [r for r in rows if np.isfinite(r["mean_psnr"])]
    best = max(finite, key=lambda r: r["mean_psnr"]) if finite else None
    report = {
        "setup": {"sampler": presets.DESK_SAMPLER, "acquisition": presets.DESK_ACQ, "phantoms": f"train split [0:{args.n}]"},
        "zero_filled_psnr": [zero_filled_psnr(img, coils, y) for img, coils, _, y in cases],
        "grid": rows,
        "best_zeta": best["zeta"] if best else None,
    }
    Path(args.out).write_text(json.dumps(report, indent=1))
    print(f"best zeta {best['zeta'] if best else 'none (all runs diverged)'}")


if __name__ == "__main__":
    main()
