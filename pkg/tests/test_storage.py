"""Container round-trips and the corrupt-file errors."""

import struct

import numpy as np
import pytest

from adverseg.boxes import BoxTuple
from adverseg.errors import DataError, FormatError
from adverseg.phantom import Sample
from adverseg.storage import (GRID_NAMES, MAGIC, frame_array, load_corpus,
                              read_array, read_sample, scan_corpus,
                              unframe_array, write_array, write_sample)


def test_frame_roundtrip_exact():
    rng = np.random.default_rng(3)
    for _ in range(20):
        shape = tuple(rng.integers(1, 9, size=rng.integers(1, 4)))
        arr = rng.normal(size=shape).astype(np.float32)
        out, end = unframe_array(frame_array(arr))
        assert end == len(frame_array(arr))
        assert out.dtype == np.float32
        np.testing.assert_array_equal(out, arr)


def test_file_roundtrip(tmp_path):
    arr = np.arange(12, dtype=np.float32).reshape(3, 4)
    p = tmp_path / "g.uald"
    write_array(p, arr)
    np.testing.assert_array_equal(read_array(p), arr)
    # header layout: magic, rank, dims, payload
    blob = p.read_bytes()
    assert blob[:4] == MAGIC
    assert struct.unpack_from("<I", blob, 4)[0] == 2
    assert struct.unpack_from("<2I", blob, 8) == (3, 4)


def test_bad_magic():
    with pytest.raises(FormatError, match="bad magic"):
        unframe_array(b"JUNK" + b"\x00" * 20)


def test_truncated_payload_reports_counts(tmp_path):
    arr = np.ones((4, 5), dtype=np.float32)
    blob = frame_array(arr)
    p = tmp_path / "t.uald"
    p.write_bytes(blob[:-8])  # drop two values
    with pytest.raises(FormatError) as ei:
        read_array(p)
    msg = str(ei.value)
    assert "(4, 5)" in msg and str(len(blob)) in msg and str(len(blob) - 8) in msg


def test_trailing_bytes_rejected(tmp_path):
    p = tmp_path / "t.uald"
    p.write_bytes(frame_array(np.zeros(3, dtype=np.float32)) + b"xx")
    with pytest.raises(FormatError, match="trailing"):
        read_array(p)


def _sample(cls=1):
    h = w = 32
    grids = {n: np.full((h, w), 0.5, dtype=np.float32) for n in GRID_NAMES[:-1]}
    mask = np.zeros((h, w), dtype=np.float32)
    box = None
    if cls:
        mask[10:14, 10:14] = 1.0
        box = BoxTuple(cx=12.0, cy=12.0, side=4.0)
    return Sample(sample_id="s0000", cls=cls, box=box, mask=mask, **grids)


def test_sample_roundtrip(tmp_path):
    s = _sample()
    d = write_sample(tmp_path, s)
    back = read_sample(d)
    assert back.sample_id == s.sample_id and back.cls == s.cls and back.box == s.box
    for n in GRID_NAMES:
        np.testing.assert_array_equal(getattr(back, n), getattr(s, n))


def test_sample_roundtrip_no_tumor(tmp_path):
    back = read_sample(write_sample(tmp_path, _sample(cls=0)))
    assert back.cls == 0 and back.box is None and not back.mask.any()


def test_scan_corpus_sorted_and_errors(tmp_path):
    for sid in ("s0002", "s0000", "s0001"):
        s = _sample()
        s.sample_id = sid
        write_sample(tmp_path, s)
    assert [d.name for d in scan_corpus(tmp_path)] == ["s0000", "s0001", "s0002"]
    assert len(load_corpus(tmp_path)) == 3
    with pytest.raises(DataError):
        scan_corpus(tmp_path / "nothere")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(DataError, match="no samples"):
        scan_corpus(empty)


def test_missing_grid_is_data_error(tmp_path):
    d = write_sample(tmp_path, _sample())
    (d / "dwi.uald").unlink()
    with pytest.raises(DataError, match="dwi"):
        read_sample(d)
