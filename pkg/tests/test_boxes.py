import numpy as np
import pytest

from adverseg.boxes import (BoxTuple, clamp_box, pixel_window, round_half_up,
                            smallest_enclosing_box)
from adverseg.errors import DomainError


def test_round_half_up_ties():
    assert round_half_up(2.5) == 3
    assert round_half_up(3.5) == 4
    assert round_half_up(-0.5) == 0
    assert round_half_up(2.49) == 2
    assert round_half_up(30.0) == 30


def test_pixel_window_odd_side_centered():
    r0, c0, s = pixel_window(BoxTuple(cx=10.0, cy=20.0, side=5.0))
    assert (r0, c0, s) == (18, 8, 5)
    assert r0 + s // 2 == 20 and c0 + s // 2 == 10


def test_pixel_window_even_side_extra_cell_high():
    # rounded center sits at local index side//2, extra cell below/right
    r0, c0, s = pixel_window(BoxTuple(cx=10.0, cy=10.0, side=4.0))
    assert (r0, c0, s) == (8, 8, 4)
    assert 10 - r0 == 2  # center row is the third of four


def test_smallest_enclosing_box_matches_pixel_scan():
    rng = np.random.default_rng(11)
    for _ in range(50):
        h, w = rng.integers(8, 40, size=2)
        mask = np.zeros((h, w), dtype=np.float32)
        r0, c0 = rng.integers(0, h - 4), rng.integers(0, w - 4)
        bh, bw = rng.integers(1, h - r0 + 1), rng.integers(1, w - c0 + 1)
        mask[r0:r0 + bh, c0:c0 + bw] = 1.0
        box = smallest_enclosing_box(mask)
        assert box.side == max(bh, bw)
        wr0, wc0, s = pixel_window(box)
        rr, cc = np.nonzero(mask)
        assert rr.min() >= wr0 and rr.max() < wr0 + s
        assert cc.min() >= wc0 and cc.max() < wc0 + s


def test_smallest_enclosing_box_empty_mask():
    with pytest.raises(DomainError):
        smallest_enclosing_box(np.zeros((8, 8)))


def test_clamp_box_keeps_square_inside():
    b = clamp_box(BoxTuple(cx=1.0, cy=63.0, side=10.0), 64, 64)
    assert b.cx == 5.0 and b.cy == 59.0 and b.side == 10.0
    big = clamp_box(BoxTuple(cx=32.0, cy=32.0, side=200.0), 64, 64)
    assert big.side == 64.0 and big.cx == 32.0 and big.cy == 32.0


def test_clamp_box_noop_when_inside():
    b = BoxTuple(cx=20.5, cy=31.0, side=12.0)
    assert clamp_box(b, 64, 64) == b
