"""Flat binary checkpoint container.

Layout (all integers little-endian)::

    8 bytes   magic  b"FSNCKPT1"
    8 bytes   uint64 header length N
    N bytes   UTF-8 JSON header
    ...       raw array data, concatenated in header order

The header is ``{"format": "freqshield-checkpoint", "version": 1,
"meta": {...}, "arrays": [{"name", "dtype", "shape", "offset", "nbytes"}]}``
where ``dtype`` is a numpy type string such as ``"<f4"`` and ``offset`` is
relative to the first byte after the header. JSON is written with sorted
keys so identical states give identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, ImageIOError

MAGIC = b"FSNCKPT1"
FORMAT = "freqshield-checkpoint"


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr)
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        raw = a.tobytes()
        entries.append({
            "name": name, "dtype": a.dtype.str, "shape": list(a.shape),
            "offset": offset, "nbytes": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"format": FORMAT, "version": 1, "meta": meta or {}, "arrays": entries},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(header)))
            fh.write(header)
            for raw in blobs:
                fh.write(raw)
    except OSError as exc:
        raise ImageIOError(f"cannot write checkpoint {path}: {exc}") from exc


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageIOError(f"cannot read checkpoint {path}: {exc}") from exc
    if data[:8] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    (n,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + n].decode("utf-8"))
    if header.get("format") != FORMAT:
        raise FormatError(f"{path}: unexpected format {header.get('format')!r}")
    base = 16 + n
    arrays = {}
    for e in header["arrays"]:
        start = base + e["offset"]
        buf = data[start:start + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(buf, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return arrays, header.get("meta", {})
