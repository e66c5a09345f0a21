import numpy as np
import pytest
import torch

from adverseg.canvas import CANVAS_SIZE
from adverseg.discriminator import _FLAT, Discriminator, discriminate
from adverseg.errors import DimensionError


def test_score_shape_and_range():
    d = Discriminator(mpr_len=39, seed=0)
    s = d(torch.rand(4, 1, CANVAS_SIZE, CANVAS_SIZE) * 2, torch.randn(4, 39))
    assert s.shape == (4,)
    assert (s >= 0).all() and (s <= 1).all()


def test_no_mpr_variant_fc_width():
    # without the radiomics vector FC1 consumes exactly the flattened convs
    d = Discriminator(mpr_len=0, seed=0)
    assert d.fc1.in_features == _FLAT == 256 * 8 * 8
    s = d(torch.rand(2, 1, CANVAS_SIZE, CANVAS_SIZE))
    assert s.shape == (2,)
    full = Discriminator(mpr_len=39, seed=0)
    assert full.fc1.in_features == _FLAT + 39


def test_mpr_length_mismatch_rejected():
    d = Discriminator(mpr_len=39, seed=0)
    with pytest.raises(DimensionError):
        d(torch.rand(1, 1, CANVAS_SIZE, CANVAS_SIZE), torch.randn(1, 26))
    with pytest.raises(DimensionError):
        d(torch.rand(1, 1, CANVAS_SIZE, CANVAS_SIZE), None)
    with pytest.raises(DimensionError):
        d(torch.rand(1, 1, 32, 32), torch.randn(1, 39))


def test_seeded_and_sensitive_to_mpr():
    a, b = Discriminator(seed=3), Discriminator(seed=3)
    cv = torch.rand(1, 1, CANVAS_SIZE, CANVAS_SIZE)
    v = torch.randn(1, 39)
    assert torch.equal(a(cv, v), b(cv, v))
    assert not torch.equal(a(cv, v), a(cv, v + 1.0))


def test_convenience_wrapper():
    d = Discriminator(mpr_len=39, seed=1)
    canvas = np.random.default_rng(0).uniform(0, 2, size=(CANVAS_SIZE, CANVAS_SIZE))
    score = discriminate(canvas, np.zeros(39), d)
    assert 0.0 <= score <= 1.0
