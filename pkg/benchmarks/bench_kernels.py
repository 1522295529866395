"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--json PATH]
"""

import argparse
import json
import timeit

import numpy as np

from mrilab import _pykernels

try:
    from mrilab import _ckernels
except ImportError:
    _ckernels = None


def cases():
    rng = np.random.default_rng(0)
    coords64 = rng.random((64 * 64, 2))
    coords320 = rng.random((320 * 320, 2))
    order64 = rng.permutation(64 * 64)
    order128 = rng.permutation(128 * 128)
    return {
        "grid_lookup 64x64 dense": lambda k: k.grid_lookup(coords64, 64, 2**19),
        "grid_lookup 320x320 hashed": lambda k: k.grid_lookup(coords320, 320, 2**12),
        "poisson_disc 64x64": lambda k: k.poisson_disc(64, 64, 1.6, 2.0, order64),
        "poisson_disc 128x128": lambda k: k.poisson_disc(128, 128, 1.6, 2.0, order128),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None)
    args = ap.parse_args()
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    rows = []
    for name, fn in cases().items():
        row = {"case": name}
        for label, mod in backends.items():
            row[label] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        if "cython" in row:
            row["speedup"] = row["python"] / row["cython"]
        rows.append(row)
        print(
            f"{name:28s} python {row['python'] * 1e3:9.2f} ms"
            + (f"   cython {row['cython'] * 1e3:8.2f} ms   x{row['speedup']:.1f}" if "cython" in row else "")
        )
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
