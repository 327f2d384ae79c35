"""Result export: commented CSV series and 16-bit graymap snapshots.

CSV files start with ``#``-prefixed header lines carrying the seed, a config
hash, the column names and units; everything below the header is plain
comma-separated data.  Apart from the single timestamp line the payload is a
deterministic function of the data.

Heatmaps are binary portable graymaps (P5, maxval 65535, big-endian) with the
field minimum and maximum recorded as header comments, so the stored integers
map back to field values exactly up to the 16-bit quantization step
``(max - min) / 65535``.
"""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

import numpy as np

MAXVAL = 65535


def export_csv(path, columns: dict, meta: dict | None = None,
               timestamp: bool = True) -> None:
    """Write named columns (equal-length 1-D sequences) with a ``#`` header.

    ``meta`` entries become ``# key = value`` lines.  An empty column dict
    produces a header-only file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    arrays = [np.asarray(columns[k]).ravel() for k in names]
    if arrays and any(a.size != arrays[0].size for a in arrays):
        raise ValueError("columns must have equal length")
    lines = []
    if timestamp:
        lines.append(f"# written = {datetime.now(timezone.utc).isoformat()}")
    for key, value in (meta or {}).items():
        lines.append(f"# {key} = {value}")
    lines.append("# columns = " + ",".join(names))
    rows = arrays[0].size if arrays else 0
    for r in range(rows):
        lines.append(",".join(format(a[r], ".17g") for a in arrays))
    path.write_text("\n".join(lines) + "\n")


def read_csv(path) -> tuple[dict, dict]:
    """Read a file written by :func:`export_csv`; returns (columns, meta)."""
    meta = {}
    names = []
    data = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
                if key.strip() == "columns":
                    names = [c for c in value.strip().split(",") if c]
            continue
        if line.strip():
            data.append([float(v) for v in line.split(",")])
    table = np.array(data) if data else np.zeros((0, len(names)))
    return {name: table[:, i] for i, name in enumerate(names)}, meta


def export_heatmap(field: np.ndarray, path, meta: dict | None = None) -> None:
    """Quantize a 2-D field to 16 bits and write it as a P5 graymap."""
    field = np.asarray(field, dtype=float)
    if field.ndim != 2:
        raise ValueError("heatmap wants a 2-D field")
    if not np.all(np.isfinite(field)):
        raise ValueError("heatmap field contains non-finite values")
    vmin = float(field.min())
    vmax = float(field.max())
    if vmax > vmin:
        q = np.rint((field - vmin) / (vmax - vmin) * MAXVAL).astype(">u2")
    else:
        q = np.zeros(field.shape, dtype=">u2")
    head = [b"P5"]
    head.append(f"# min = {vmin!r}".encode())
    head.append(f"# max = {vmax!r}".encode())
    for key, value in (meta or {}).items():
        head.append(f"# {key} = {value}".encode())
    head.append(f"{field.shape[1]} {field.shape[0]}".encode())
    head.append(str(MAXVAL).encode())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"\n".join(head) + b"\n" + q.tobytes())


def read_heatmap(path) -> tuple[np.ndarray, float, float]:
    """Inverse of :func:`export_heatmap`: (values, vmin, vmax).

    Values are reconstructed from the quantized levels, hence equal the
    original field up to half a quantization step.
    """
    raw = Path(path).read_bytes()
    pos = 0
    tokens = []
    comments = []
    while len(tokens) < 4:
        eol = raw.index(b"\n", pos)
        line = raw[pos:eol]
        pos = eol + 1
        if line.startswith(b"#"):
            comments.append(line[1:].decode().strip())
            continue
        tokens.extend(line.split())
    magic, width, height, maxval = tokens[:4]
    if magic != b"P5" or int(maxval) != MAXVAL:
        raise ValueError("not a 16-bit P5 graymap from this package")
    shape = (int(height), int(width))
    q = np.frombuffer(raw[pos:pos + 2 * shape[0] * shape[1]],
                      dtype=">u2").reshape(shape).astype(float)
    meta = {}
    for c in comments:
        key, _, value = c.partition("=")
        meta[key.strip()] = value.strip()
    vmin = float(meta["min"])
    vmax = float(meta["max"])
    if vmax > vmin:
        values = vmin + q / MAXVAL * (vmax - vmin)
    else:
        values = np.full(shape, vmin)
    return values, vmin, vmax
