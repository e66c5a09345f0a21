"""First-order and GLCM features vs scalar-loop oracles, plus the canvas
region mapping and the z-normalizer."""

import math

import numpy as np
import pytest

from adverseg.boxes import BoxTuple
from adverseg.canvas import PAD_VALUE, integrate
from adverseg.errors import DimensionError
from adverseg.radiomics import (FEATURES_PER_PHASE, FO_NAMES, GLCM_LEVELS,
                                GLCM_NAMES, Normalizer, canvas_region,
                                extract_mpr, feature_names, first_order,
                                glcm_features, region_features)


def _fo_oracle(vals):
    n = len(vals)
    mean = sum(vals) / n
    m2 = sum((v - mean) ** 2 for v in vals) / n
    m3 = sum((v - mean) ** 3 for v in vals) / n
    m4 = sum((v - mean) ** 4 for v in vals) / n
    skew = m3 / m2**1.5 if m2 > 1e-12 else 0.0
    kurt = m4 / m2**2 if m2 > 1e-12 else 0.0
    vmin, vmax = min(vals), max(vals)
    energy = sum(v * v for v in vals)
    counts = [0] * 32
    if vmax > vmin:
        width = (vmax - vmin) / 32
        for v in vals:
            counts[min(int((v - vmin) / width), 31)] += 1
    else:
        counts[0] = n
    ent = -sum(c / n * math.log2(c / n) for c in counts if c)
    return [mean, m2, skew, kurt, vmin, vmax, energy, ent]


def test_first_order_scalar_loop_oracle():
    rng = np.random.default_rng(31)
    vals = rng.uniform(size=100)
    got = first_order(vals)
    want = _fo_oracle(list(vals))
    assert np.abs(got - np.array(want)).max() < 1e-9


def test_first_order_binary_region():
    # {0,1} half and half: mean .5, population variance .25, skew 0, kurt 1,
    # entropy exactly one bit
    v = np.array([0.0, 1.0] * 8)
    f = dict(zip(FO_NAMES, first_order(v)))
    assert f["mean"] == 0.5 and f["variance"] == 0.25
    assert f["skewness"] == 0.0 and f["kurtosis"] == 1.0
    assert f["min"] == 0.0 and f["max"] == 1.0
    assert f["energy"] == 8.0
    assert abs(f["entropy"] - 1.0) < 1e-12


def test_first_order_constant_region():
    f = dict(zip(FO_NAMES, first_order(np.full(20, 0.7))))
    assert f["variance"] < 1e-30 and f["skewness"] == 0.0 and f["kurtosis"] == 0.0
    assert f["entropy"] == 0.0
    with pytest.raises(DimensionError):
        first_order(np.array([]))


def _glcm_oracle(grid, region, levels, offset):
    vals = grid[region]
    vmin, vmax = vals.min(), vals.max()
    if vmax > vmin:
        width = (vmax - vmin) / levels
        q = np.clip(np.floor((grid - vmin) / width), 0, levels - 1).astype(int)
    else:
        q = np.zeros_like(grid, dtype=int)
    dx, dy = offset
    h, w = grid.shape
    P = np.zeros((levels, levels))
    for r in range(h):
        for c in range(w):
            r2, c2 = r + dy, c + dx
            if 0 <= r2 < h and 0 <= c2 < w and region[r, c] and region[r2, c2]:
                P[q[r, c], q[r2, c2]] += 1
                P[q[r2, c2], q[r, c]] += 1
    return P / P.sum()


def test_glcm_two_level_stripes_pair_enumeration():
    # horizontal stripes, offset (1,0): every pair is (v, v)
    grid = np.zeros((6, 8))
    grid[1::2] = 1.0
    region = np.ones_like(grid, dtype=bool)
    P = _glcm_oracle(grid, region, GLCM_LEVELS, (1, 0))
    assert P[0, 0] == 0.5 and P[GLCM_LEVELS - 1, GLCM_LEVELS - 1] == 0.5
    got = dict(zip(GLCM_NAMES, glcm_features(grid, region)))
    assert got["contrast"] == 0.0
    assert got["energy"] == 0.5
    assert got["homogeneity"] == 1.0
    assert abs(got["entropy"] - 1.0) < 1e-12
    assert abs(got["correlation"] - 1.0) < 1e-12


def test_glcm_random_region_matches_oracle():
    rng = np.random.default_rng(41)
    for _ in range(5):
        grid = rng.uniform(size=(9, 9))
        region = rng.uniform(size=(9, 9)) < 0.6
        region[4, 4] = True  # keep nonempty
        P = _glcm_oracle(grid, region, GLCM_LEVELS, (1, 0))
        i = np.arange(GLCM_LEVELS, dtype=float)
        ii, jj = np.meshgrid(i, i, indexing="ij")
        px = P.sum(axis=1)
        mu = (i * px).sum()
        s2 = ((i - mu) ** 2 * px).sum()
        want = [
            (P * (ii - jj) ** 2).sum(),
            ((ii - mu) * (jj - mu) * P).sum() / s2 if s2 > 1e-12 else 0.0,
            (P * P).sum(),
            (P / (1.0 + np.abs(ii - jj))).sum(),
            -(P[P > 0] * np.log2(P[P > 0])).sum(),
        ]
        got = glcm_features(grid, region)
        assert np.abs(got - np.array(want)).max() < 1e-9


def test_glcm_degenerate_cases():
    grid = np.full((5, 5), 0.3)
    region = np.ones((5, 5), dtype=bool)
    f = dict(zip(GLCM_NAMES, glcm_features(grid, region)))
    assert f["correlation"] == 0.0  # zero variance
    assert f["contrast"] == 0.0 and f["homogeneity"] == 1.0
    lone = np.zeros((5, 5), dtype=bool)
    lone[2, 2] = True  # no co-occurring pair at offset (1,0)
    assert (glcm_features(grid, lone) == 0).all()
    with pytest.raises(DimensionError):
        glcm_features(grid, np.zeros((5, 5), dtype=bool))
    with pytest.raises(DimensionError):
        glcm_features(grid, np.ones((4, 4), dtype=bool))


def test_feature_vector_layout():
    assert FEATURES_PER_PHASE == 13
    assert feature_names(("delay",)) == [f"delay_fo_{n}" for n in FO_NAMES] + \
        [f"delay_glcm_{n}" for n in GLCM_NAMES]
    names = feature_names(("a", "pv", "delay"))
    assert len(names) == 39
    assert names[0] == "a_fo_mean" and names[13] == "pv_fo_mean" and names[26] == "delay_fo_mean"
    # dict order never matters, PHASE_ORDER does
    assert feature_names(("delay", "a")) == feature_names(("a", "delay"))


def test_canvas_region_roundtrip():
    mask = np.zeros((64, 64), dtype=np.float32)
    mask[20:28, 30:39] = 1.0
    box = BoxTuple(cx=34.0, cy=23.5, side=9.0)
    cv = integrate(mask, box)
    region = canvas_region(cv.values, box, 64, 64)
    np.testing.assert_array_equal(region, mask.astype(bool))


def test_sentinel_never_in_region():
    # perturbing ring values above 1 must not change the features
    mask = np.zeros((64, 64), dtype=np.float32)
    mask[10:14, 10:14] = 1.0
    box = BoxTuple(cx=12.0, cy=12.0, side=4.0)
    cv = integrate(mask, box)
    grids = {"a": np.random.default_rng(0).uniform(size=(64, 64))}
    ref = extract_mpr(cv, None, grids)
    tweaked = cv.values.copy()
    tweaked[tweaked == PAD_VALUE] = 1.7
    alt = extract_mpr(tweaked, box, grids)
    np.testing.assert_array_equal(ref.values, alt.values)
    assert not ref.empty_region


def test_empty_region_zero_vector_flag():
    region = np.zeros((32, 32), dtype=bool)
    grids = {"a": np.ones((32, 32)), "pv": np.ones((32, 32))}
    vec = region_features(region, grids)
    assert vec.empty_region
    assert vec.values.shape == (26,)
    assert (vec.values == 0).all()


def test_degenerate_box_counts_as_empty_region():
    # a side that rounds to no window at all is an empty region, not an error
    canvas = np.full((64, 64), 2.0)
    grids = {ph: np.ones((64, 64)) for ph in ("a", "pv", "delay")}
    vec = extract_mpr(canvas, BoxTuple(30.0, 30.0, 0.4), grids)
    assert vec.empty_region
    assert vec.values.shape == (39,)
    assert (vec.values == 0).all()


def test_phase_order_and_missing_phase():
    rng = np.random.default_rng(2)
    region = rng.uniform(size=(16, 16)) < 0.5
    region[8, 8] = True
    ga, gp, gd = rng.uniform(size=(3, 16, 16))
    full = region_features(region, {"a": ga, "pv": gp, "delay": gd})
    ad = region_features(region, {"delay": gd, "a": ga})
    assert full.values.shape == (39,)
    assert ad.values.shape == (26,)
    np.testing.assert_array_equal(ad.values[:13], full.values[:13])
    np.testing.assert_array_equal(ad.values[13:], full.values[26:])
    with pytest.raises(DimensionError):
        extract_mpr(np.full((64, 64), 2.0), BoxTuple(32.0, 32.0, 8.0), {})


def test_normalizer_fit_apply():
    rng = np.random.default_rng(5)
    vecs = [rng.normal(loc=3.0, scale=2.0, size=13) for _ in range(40)]
    vecs = [v * np.r_[np.ones(12), 0.0] + np.r_[np.zeros(12), 5.0] for v in vecs]
    nz = Normalizer.fit(vecs)
    assert nz.std[-1] == 1.0  # constant feature keeps scale 1
    z = np.stack([nz.apply(v) for v in vecs])
    np.testing.assert_allclose(z[:, :12].mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(z[:, :12].std(axis=0), 1.0, atol=1e-9)
    assert (z[:, -1] == 0.0).all()
