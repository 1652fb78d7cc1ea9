"""File formats: binary map files, CSV maps and curves, JSON result documents.

Map file layout (all little-endian)::

    offset  size  field
    0       4     magic b"SRFM"
    4       4     version (uint32, = 1)
    8       4     nside (uint32)
    12      1     ordering (0 = ring, 1 = nested)
    13      8     pixel count (uint64, = 12 nside^2)
    21      8 n   float64 pixel values
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .estimator import SphericalMap
from .models import RenyiCurve
from .sphere import PixelGrid

__all__ = [
    "MAGIC",
    "RESULT_FORMAT",
    "build_result",
    "config_hash",
    "read_curve_csv",
    "read_map",
    "read_map_csv",
    "read_result",
    "validate_result",
    "write_curve_csv",
    "write_map",
    "write_map_csv",
    "write_result",
]

MAGIC = b"SRFM"
VERSION = 1
_HEADER = struct.Struct("<4sIIBQ")
_ORDER_CODE = {"ring": 0, "nested": 1}
_ORDER_NAME = {v: k for k, v in _ORDER_CODE.items()}

RESULT_FORMAT = "renyisphere-result"
RESULT_VERSION = 1


def write_map(path, sky: SphericalMap) -> None:
    grid = sky.grid
    header = _HEADER.pack(MAGIC, VERSION, grid.nside, _ORDER_CODE[grid.ordering], grid.npix)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(sky.values, dtype="<f8").tobytes())


def read_map(path) -> SphericalMap:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated map header")
    magic, version, nside, order, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported map version {version}")
    if order not in _ORDER_NAME:
        raise FormatError(f"{path}: unknown ordering code {order}")
    try:
        grid = PixelGrid(nside, _ORDER_NAME[order])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if count != grid.npix:
        raise FormatError(f"{path}: pixel count {count} does not match nside {nside}")
    payload = data[_HEADER.size:]
    if len(payload) != 8 * count:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, expected {8 * count}")
    values = np.frombuffer(payload, dtype="<f8").astype(float)
    return SphericalMap(grid, values, {"source": str(path)})


def write_map_csv(path, sky: SphericalMap) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pixel_index", "value"])
        for i, v in enumerate(sky.values):
            w.writerow([i, repr(float(v))])


def _read_csv_columns(path, names):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from None
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows:
        raise FormatError(f"{path}: empty CSV file")
    header = [h.strip() for h in rows[0]]
    missing = [n for n in names if n not in header]
    if missing:
        raise FormatError(f"{path}: missing CSV column(s) {', '.join(missing)}")
    idx = [header.index(n) for n in names]
    try:
        cols = np.array([[float(r[i]) for i in idx] for r in rows[1:]], dtype=float)
    except (ValueError, IndexError):
        raise FormatError(f"{path}: non-numeric or short CSV row") from None
    if cols.size == 0:
        raise FormatError(f"{path}: CSV file has no data rows")
    return cols.T


def read_map_csv(path, nside: int | None = None, ordering: str = "nested") -> SphericalMap:
    """Read ``pixel_index,value`` rows; nside is inferred from the row count if not given."""
    index, values = _read_csv_columns(path, ["pixel_index", "value"])
    if np.any(index != np.round(index)):
        raise FormatError(f"{path}: pixel indices must be integers")
    if nside is None:
        nside = int(round(np.sqrt(index.size / 12)))
    try:
        grid = PixelGrid(nside, ordering)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    index = index.astype(np.int64)
    if index.size != grid.npix or np.any(np.sort(index) != np.arange(grid.npix)):
        raise FormatError(f"{path}: pixel indices must cover 0..{grid.npix - 1} exactly once")
    out = np.empty(grid.npix)
    out[index] = values
    return SphericalMap(grid, out, {"source": str(path)})


def write_curve_csv(path_or_file, columns: dict) -> None:
    """Write equal-length named columns; ``path_or_file`` may be an open text stream."""
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    if len({a.size for a in arrays}) != 1:
        raise FormatError("curve columns differ in length")

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*arrays):
            w.writerow([repr(float(v)) for v in row])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)


def read_curve_csv(path) -> RenyiCurve:
    q, T = _read_csv_columns(path, ["q", "T"])
    try:
        return RenyiCurve(q, T, {"source": str(path)})
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def validate_result(doc: dict) -> dict:
    """Schema check for result documents; returns ``doc`` or raises FormatError."""
    if not isinstance(doc, dict):
        raise FormatError("result document must be a JSON object")
    if doc.get("format") != RESULT_FORMAT:
        raise FormatError(f"not a result document (format={doc.get('format')!r})")
    if doc.get("version") != RESULT_VERSION:
        raise FormatError(f"unsupported result version {doc.get('version')!r}")
    prov = doc.get("provenance")
    if not isinstance(prov, dict) or "config_hash" not in prov or "seed" not in prov:
        raise FormatError("result document lacks provenance (seed, config_hash)")
    q = doc.get("q")
    if not isinstance(q, list) or not q:
        raise FormatError("result document lacks a q grid")
    for key in ("T", "alpha", "f"):
        arr = doc.get(key)
        if arr is None and key != "T":
            continue
        if not isinstance(arr, list) or len(arr) != len(q):
            raise FormatError(f"array {key!r} missing or not the length of q")
        if not all(isinstance(v, (int, float)) for v in arr):
            raise FormatError(f"array {key!r} has non-numeric entries")
    fits = doc.get("fits", [])
    if not isinstance(fits, list):
        raise FormatError("'fits' must be a list")
    for block in fits:
        for key in ("family", "params", "rmse", "residuals"):
            if key not in block:
                raise FormatError(f"fit block lacks {key!r}")
        if len(block["residuals"]) != len(q):
            raise FormatError("fit residuals not the length of q")
    if not isinstance(doc.get("validity", []), list):
        raise FormatError("'validity' must be a list")
    return doc


def build_result(q, T, alpha=None, f=None, fits=(), validity=(), provenance=None) -> dict:
    doc = {
        "format": RESULT_FORMAT,
        "version": RESULT_VERSION,
        "q": q,
        "T": T,
        "alpha": alpha,
        "f": f,
        "fits": [fit.as_dict() if hasattr(fit, "as_dict") else fit for fit in fits],
        "validity": [v.as_dict() if hasattr(v, "as_dict") else v for v in validity],
        "provenance": dict(provenance or {}),
    }
    doc["provenance"].setdefault("seed", None)
    doc["provenance"].setdefault("config_hash", config_hash(doc["provenance"].get("config", {})))
    doc = {k: v for k, v in _jsonable(doc).items() if v is not None}
    return validate_result(doc)


def write_result(path, doc: dict) -> None:
    validate_result(doc)
    text = json.dumps(doc, indent=1, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def read_result(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg})") from None
    return validate_result(doc)
