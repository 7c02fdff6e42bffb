"""Dataset IO and the synthetic mixture generator.

Two feature-file formats are supported: a binary container (magic "CLDF")
for exact round trips across languages, and plain CSV for hand-made inputs.
All multi-byte fields are little-endian; features are row-major.

CLDF v1 layout:

    offset  size  field
    0       4     magic "CLDF"
    4       2     format version (u16) = 1
    6       2     flags (u16), bit 0 = labels block present
    8       8     row count N (u64)
    16      8     feature width n (u64)
    24      1     dtype tag (u8): 0 = float64, 1 = float32
    25      Nxnxs feature block, row-major, s = dtype size
    ...     Nx4   labels block (u32), present iff flags bit 0
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataFormatError, ValidationError

_MAGIC = b"CLDF"
_VERSION = 1
_HEADER = struct.Struct("<4sHHQQB")
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_DTYPE_TAGS = {np.dtype("float64"): 0, np.dtype("float32"): 1}


def write_cldf(path, features: np.ndarray, labels=None) -> None:
    """Write a feature matrix (and optional integer labels) to a CLDF file."""
    features = np.asarray(features)
    if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
        raise ValidationError(
            f"features must be a non-empty 2-d matrix, got shape {features.shape}"
        )
    if features.dtype not in _DTYPE_TAGS:
        raise ValidationError(
            f"features dtype must be float64 or float32, got {features.dtype}"
        )
    if not np.all(np.isfinite(features)):
        raise ValidationError("features must be finite")
    n_rows, width = features.shape
    flags = 0
    label_block = b""
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (n_rows,):
            raise ValidationError(
                f"labels must have shape ({n_rows},), got {labels.shape}"
            )
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValidationError("labels must be integers")
        if np.any(labels < 0) or np.any(labels > np.iinfo(np.uint32).max):
            raise ValidationError("labels must fit in u32")
        flags |= 1
        label_block = labels.astype("<u4").tobytes()
    header = _HEADER.pack(_MAGIC, _VERSION, flags, n_rows, width,
                          _DTYPE_TAGS[features.dtype])
    body = np.ascontiguousarray(features).astype(
        _DTYPES[_DTYPE_TAGS[features.dtype]], copy=False
    ).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)
        fh.write(label_block)


def read_cldf(path):
    """Read a CLDF file; returns (features, labels-or-None).

    Features come back in their stored dtype (little-endian decoded to
    native); raises DataFormatError on a bad magic, unknown version or
    dtype, truncation, or trailing bytes.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise DataFormatError("CLDF: file shorter than header")
    magic, version, flags, n_rows, width, dtype_tag = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise DataFormatError(f"CLDF: bad magic {magic!r}")
    if version != _VERSION:
        raise DataFormatError(f"CLDF: unsupported version {version}")
    if dtype_tag not in _DTYPES:
        raise DataFormatError(f"CLDF: unknown dtype tag {dtype_tag}")
    if flags & ~1:
        raise DataFormatError(f"CLDF: unknown flag bits {flags:#06x}")
    if n_rows < 1 or width < 1:
        raise DataFormatError("CLDF: empty feature matrix")
    dtype = _DTYPES[dtype_tag]
    feat_bytes = n_rows * width * dtype.itemsize
    label_bytes = 4 * n_rows if flags & 1 else 0
    expected = _HEADER.size + feat_bytes + label_bytes
    if len(blob) < expected:
        raise DataFormatError(
            f"CLDF: truncated, expected {expected} bytes, got {len(blob)}"
        )
    if len(blob) > expected:
        raise DataFormatError(
            f"CLDF: {len(blob) - expected} trailing bytes"
        )
    features = np.frombuffer(
        blob, dtype=dtype, count=n_rows * width, offset=_HEADER.size
    ).reshape(n_rows, width).astype(dtype.newbyteorder("="), copy=True)
    labels = None
    if flags & 1:
        labels = np.frombuffer(
            blob, dtype="<u4", count=n_rows, offset=_HEADER.size + feat_bytes
        ).astype(np.int64, copy=True)
    return features, labels


def write_features_csv(path, features: np.ndarray, header=None) -> None:
    """Write features as CSV, 17 significant digits, no quoting."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.size == 0:
        raise ValidationError("features must be a non-empty 2-d matrix")
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            if len(header) != features.shape[1]:
                raise ValidationError("header width must match features")
            fh.write(",".join(header) + "\n")
        for row in features:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_features_csv(path) -> np.ndarray:
    """Read a CSV feature matrix; a non-numeric first row is a header."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise DataFormatError("CSV: file is empty")
    start = 0
    try:
        [float(v) for v in lines[0].split(",")]
    except ValueError:
        start = 1
    if start == len(lines):
        raise DataFormatError("CSV: header but no data rows")
    rows = []
    width = None
    for i, line in enumerate(lines[start:], start=start + 1):
        parts = line.split(",")
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise DataFormatError(
                f"CSV: row {i} has {len(parts)} fields, expected {width}"
            )
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise DataFormatError(f"CSV: row {i} is not numeric: {exc}")
    return np.asarray(rows, dtype=np.float64)


def read_labels_csv(path) -> np.ndarray:
    """Read a single-column CSV of integer labels."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise DataFormatError("labels CSV: file is empty")
    start = 0
    try:
        int(lines[0])
    except ValueError:
        start = 1
    out = []
    for i, line in enumerate(lines[start:], start=start + 1):
        try:
            out.append(int(line))
        except ValueError as exc:
            raise DataFormatError(f"labels CSV: row {i}: {exc}")
    if not out:
        raise DataFormatError("labels CSV: no data rows")
    return np.asarray(out, dtype=np.int64)


def read_features_auto(path):
    """Dispatch on content: CLDF when the magic matches, else CSV.

    Returns (features, labels-or-None); CSV files carry no labels.
    """
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _MAGIC:
        return read_cldf(path)
    return read_features_csv(path), None


def make_mixture(
    n_components: int,
    dim: int,
    per_component: int,
    radius: float,
    noise_std: float,
    seed: int,
):
    """Sample an isotropic Gaussian mixture with well-separated centers.

    Centers sit at distance ``radius`` from the origin along random
    orthonormal directions (orthonormalized whenever n_components <= dim,
    so pairwise center distances are exactly radius * sqrt(2)); rows are
    grouped by component.  Returns (features (N, dim) float64, labels (N,)).
    """
    if n_components < 2:
        raise ValidationError(f"n_components must be >= 2, got {n_components}")
    if dim < 1 or per_component < 1:
        raise ValidationError("dim and per_component must be >= 1")
    if radius <= 0.0 or noise_std < 0.0:
        raise ValidationError("radius must be > 0 and noise_std >= 0")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    raw = rng.standard_normal((dim, n_components))
    if n_components <= dim:
        q, r = np.linalg.qr(raw)
        q *= np.sign(np.diag(r))
        directions = q.T
    else:
        directions = (raw / np.linalg.norm(raw, axis=0, keepdims=True)).T
    centers = radius * directions
    labels = np.repeat(np.arange(n_components, dtype=np.int64), per_component)
    noise = rng.standard_normal((labels.size, dim))
    features = centers[labels] + noise_std * noise
    return features, labels
