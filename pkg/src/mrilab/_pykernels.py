"""Pure-Python/numpy implementations of the hot kernels.

Same signatures and bit-identical results as the compiled ``_ckernels``
module; used when the extension is not built or ``MRILAB_PURE_PYTHON=1``.
"""

import math

import numpy as np

HASH_PRIME = 2654435761


def grid_lookup(coords, resolution, table_size):
    """Corner slots and bilinear weights of one hash-grid level.

    ``coords`` is (N, 2) in [0, 1]; returns ``(idx, weights)``, both (N, 4),
    corners ordered (0,0), (1,0), (0,1), (1,1) in (x, y). Grids whose
    (resolution+1)^2 vertices fit in the table are indexed densely; larger
    grids use the spatial hash ``(vx * 1) ^ (vy * 2654435761) mod table_size``.
    """
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    pos = coords * resolution
    base = np.minimum(np.floor(pos), resolution - 1).astype(np.int64)
    frac = pos - base
    n = coords.shape[0]
    idx = np.empty((n, 4), dtype=np.int64)
    weights = np.empty((n, 4), dtype=np.float64)
    dense = (resolution + 1) ** 2 <= table_size
    for c, (dx, dy) in enumerate(((0, 0), (1, 0), (0, 1), (1, 1))):
        vx = base[:, 0] + dx
        vy = base[:, 1] + dy
        if dense:
            idx[:, c] = vx + vy * (resolution + 1)
        else:
            h = vx.astype(np.uint64) ^ (vy.astype(np.uint64) * np.uint64(HASH_PRIME))
            idx[:, c] = (h % np.uint64(table_size)).astype(np.int64)
        wx = frac[:, 0] if dx else 1.0 - frac[:, 0]
        wy = frac[:, 1] if dy else 1.0 - frac[:, 1]
        weights[:, c] = wx * wy
    return idx, weights


def poisson_disc(height, width, r0, alpha, order):
    """Variable-density dart throwing on the integer k-space grid.

    Candidates are visited in ``order`` (a permutation of the flat indices);
    a candidate at normalised centre distance rho is accepted when no
    accepted point lies closer than ``r0 * (1 + alpha * rho)``.
    """
    keep = np.zeros((height, width), dtype=np.uint8)
    ch, cw = height / 2.0, width / 2.0
    for flat in np.asarray(order, dtype=np.int64):
        i, j = divmod(int(flat), width)
        rho = math.sqrt(((i - ch) / ch) ** 2 + ((j - cw) / cw) ** 2) / math.sqrt(2.0)
        r = r0 * (1.0 + alpha * rho)
        w = int(math.ceil(r))
        i0, i1 = max(i - w, 0), min(i + w + 1, height)
        j0, j1 = max(j - w, 0), min(j + w + 1, width)
        patch = keep[i0:i1, j0:j1]
        if patch.any():
            ii, jj = np.nonzero(patch)
            d2 = (ii + i0 - i) ** 2 + (jj + j0 - j) ** 2
            if np.any(d2 < r * r):
                continue
        keep[i, j] = 1
    return keep
