"""Reader/writer for the ``ct1`` tensor container.

A tensor is stored as two files: a UTF-8 JSON header (``name.ct1``) holding
``shape``, ``dtype`` and ``order``, and a sibling ``name.raw`` with the
little-endian values in row-major order. Complex values are interleaved
(real, imag) 32-bit floats. Headers may carry an optional ``meta`` object.
"""

import json
import os
from pathlib import Path

import numpy as np

from .errors import TensorIOError

_DTYPES = {
    "c8": np.dtype("<c8"),
    "f4": np.dtype("<f4"),
    "u1": np.dtype("u1"),
}


def raw_path(path):
    path = Path(path)
    return path.with_suffix(".raw")


def _dtype_code(array):
    if np.iscomplexobj(array):
        return "c8"
    if array.dtype == np.bool_ or array.dtype == np.uint8:
        return "u1"
    if np.issubdtype(array.dtype, np.floating):
        return "f4"
    if np.issubdtype(array.dtype, np.integer):
        if array.size and (array.min() < 0 or array.max() > 255):
            raise TensorIOError(f"integer array with values outside [0, 255] cannot be stored as u1")
        return "u1"
    raise TensorIOError(f"unsupported dtype {array.dtype}")


def _atomic_write(path, data, mode):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def save_tensor(path, array, meta=None):
    """Write ``array`` to ``path`` (header) and its ``.raw`` sibling.

    complex128 and float64 inputs are narrowed to c8/f4; booleans and small
    non-negative integers are stored as u1.
    """
    path = Path(path)
    array = np.asarray(array)
    code = _dtype_code(array)
    data = np.ascontiguousarray(array, dtype=_DTYPES[code])
    header = {"shape": list(data.shape), "dtype": code, "order": "row-major"}
    if meta is not None:
        header["meta"] = meta
    path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(raw_path(path), data.tobytes(order="C"), "wb")
    _atomic_write(path, json.dumps(header, indent=1).encode("utf-8"), "wb")
    return path


def read_header(path):
    path = Path(path)
    if not path.is_file():
        raise TensorIOError(f"missing tensor header: {path}")
    try:
        header = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TensorIOError(f"malformed header {path}: {exc}") from exc
    if not isinstance(header, dict):
        raise TensorIOError(f"malformed header {path}: expected a JSON object")
    for key in ("shape", "dtype", "order"):
        if key not in header:
            raise TensorIOError(f"malformed header {path}: missing field {key!r}")
    if header["dtype"] not in _DTYPES:
        raise TensorIOError(f"malformed header {path}: unsupported dtype {header['dtype']!r}")
    if header["order"] != "row-major":
        raise TensorIOError(f"malformed header {path}: unsupported order {header['order']!r}")
    shape = header["shape"]
    if not isinstance(shape, list) or not all(isinstance(n, int) and n >= 0 for n in shape):
        raise TensorIOError(f"malformed header {path}: bad shape {shape!r}")
    return header


def load_tensor(path, with_meta=False):
    """Load a tensor written by :func:`save_tensor`.

    Returns the array, or ``(array, meta)`` when ``with_meta`` is true.
    """
    path = Path(path)
    header = read_header(path)
    dtype = _DTYPES[header["dtype"]]
    shape = tuple(header["shape"])
    raw = raw_path(path)
    if not raw.is_file():
        raise TensorIOError(f"missing raw data file: {raw}")
    payload = raw.read_bytes()
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(payload) != expected:
        raise TensorIOError(
            f"{raw}: byte length {len(payload)} does not match header "
            f"shape {list(shape)} dtype {header['dtype']} ({expected} bytes)"
        )
    array = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
    if with_meta:
        return array, header.get("meta")
    return array
