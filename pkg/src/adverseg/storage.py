"""On-disk corpus layout and the .uald grid container.

A .uald file is: magic b"UALD", u32 LE rank, rank u32 LE dims, then the
row-major float32 LE payload. One array per file, one directory per sample:

    <root>/<sample_id>/{t1,t2,dwi,ce_a,ce_pv,ce_d,mask}.uald
    <root>/<sample_id>/meta.json     {"cls": 0|1|2, "box": {...}|null}
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .boxes import BoxTuple
from .errors import DataError, FormatError

MAGIC = b"UALD"

GRID_NAMES = ("t1", "t2", "dwi", "ce_a", "ce_pv", "ce_d", "mask")


def frame_array(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    return (MAGIC + struct.pack("<I", arr.ndim)
            + struct.pack(f"<{arr.ndim}I", *arr.shape) + arr.tobytes())


def unframe_array(blob: bytes, offset: int = 0, where: str = "buffer") -> tuple[np.ndarray, int]:
    """Parse one framed array starting at offset; returns (array, next offset)."""
    if blob[offset:offset + 4] != MAGIC:
        raise FormatError(f"{where}: bad magic {blob[offset:offset + 4]!r} at offset {offset}, expected {MAGIC!r}")
    if len(blob) < offset + 8:
        raise FormatError(f"{where}: truncated header ({len(blob) - offset} bytes from offset {offset})")
    (rank,) = struct.unpack_from("<I", blob, offset + 4)
    hdr_end = offset + 8 + 4 * rank
    if len(blob) < hdr_end:
        raise FormatError(f"{where}: truncated dims, rank={rank} needs {hdr_end - offset} bytes")
    dims = struct.unpack_from(f"<{rank}I", blob, offset + 8)
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    end = hdr_end + 4 * count
    if len(blob) < end:
        raise FormatError(
            f"{where}: payload size mismatch, dims {dims} need {end - offset} bytes, have {len(blob) - offset}"
        )
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=hdr_end)
    return data.reshape(dims).copy(), end


def write_array(path: str | Path, arr: np.ndarray) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(frame_array(arr))
    os.replace(tmp, path)


def read_array(path: str | Path) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    arr, end = unframe_array(blob, 0, where=str(path))
    if end != len(blob):
        raise FormatError(f"{path}: {len(blob) - end} trailing bytes after the array payload")
    return arr


def _meta_bytes(cls: int, box: BoxTuple | None, sample_id: str) -> bytes:
    box_obj = None if box is None else {"cx": box.cx, "cy": box.cy, "side": box.side}
    doc = {"cls": int(cls), "box": box_obj, "sample_id": sample_id}
    return (json.dumps(doc, sort_keys=True) + "\n").encode()


def write_sample(root: str | Path, sample) -> Path:
    """Write one Sample (see phantom.Sample) under root; returns its directory."""
    d = Path(root) / sample.sample_id
    d.mkdir(parents=True, exist_ok=True)
    for name in GRID_NAMES:
        write_array(d / f"{name}.uald", getattr(sample, name))
    tmp = d / "meta.json.tmp"
    tmp.write_bytes(_meta_bytes(sample.cls, sample.box, sample.sample_id))
    os.replace(tmp, d / "meta.json")
    return d


def read_sample(sample_dir: str | Path):
    from .phantom import Sample  # local import, phantom imports us for writing

    d = Path(sample_dir)
    meta_path = d / "meta.json"
    if not meta_path.exists():
        raise DataError(f"{d}: missing meta.json")
    meta = json.loads(meta_path.read_text())
    grids = {}
    for name in GRID_NAMES:
        p = d / f"{name}.uald"
        if not p.exists():
            raise DataError(f"{d}: missing grid {name}.uald")
        grids[name] = read_array(p)
    box = None
    if meta.get("box") is not None:
        b = meta["box"]
        box = BoxTuple(cx=float(b["cx"]), cy=float(b["cy"]), side=float(b["side"]))
    return Sample(
        sample_id=meta.get("sample_id", d.name),
        cls=int(meta["cls"]),
        box=box,
        **grids,
    )


def scan_corpus(root: str | Path) -> list[Path]:
    """Sample directories under root, sorted by name for a stable order."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"corpus root {root} is not a directory")
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and (p / "meta.json").exists())
    if not dirs:
        raise DataError(f"corpus root {root} contains no samples")
    return dirs


def load_corpus(root: str | Path) -> list:
    return [read_sample(d) for d in scan_corpus(root)]
