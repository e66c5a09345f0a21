"""Loss formulas vs hand-computed sums, label conventions, finite differences."""

import math

import numpy as np
import pytest
import torch

from adverseg.losses import (CLAMP_EPS, LossWeights, adv_loss, cls_loss,
                             det_loss, disc_loss, pix_ce, reg_loss, seg_loss,
                             smooth_l1)


def test_pix_ce_four_term_hand_sum():
    pred = torch.tensor([[0.9, 0.2], [0.6, 0.7]], dtype=torch.float64)
    target = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
    want = -(math.log(0.9) + math.log(0.8) + math.log(0.4) + math.log(0.7)) / 4
    assert abs(float(pix_ce(pred, target)) - want) < 1e-9


def test_pix_ce_random_oracle():
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = rng.uniform(0.01, 0.99, size=(3, 3))
        t = (rng.uniform(size=(3, 3)) < 0.5).astype(float)
        want = -np.mean(t * np.log(p) + (1 - t) * np.log(1 - p))
        got = float(pix_ce(torch.tensor(p), torch.tensor(t)))
        assert abs(got - want) < 1e-9


def test_pix_ce_clamps_extremes():
    v = float(pix_ce(torch.tensor([[0.0]], dtype=torch.float64), torch.tensor([[1.0]], dtype=torch.float64)))
    assert abs(v - (-math.log(CLAMP_EPS))) < 1e-9


def test_adv_loss_formula():
    s = torch.tensor(0.3, dtype=torch.float64)
    assert abs(float(adv_loss(s, 1)) + math.log(0.3)) < 1e-12
    assert abs(float(adv_loss(s, 0)) + math.log(0.7)) < 1e-12


def test_disc_loss_label_conventions():
    eps = CLAMP_EPS
    t = lambda v: torch.tensor(v, dtype=torch.float64)
    # printed convention: fake scored toward 1, real toward 0
    confident_printed = float(disc_loss(t(1 - eps), t(eps)))
    assert confident_printed < 1e-5
    wrong_way = float(disc_loss(t(eps), t(1 - eps)))
    assert abs(wrong_way - 2 * math.log(1 / eps)) < 1e-6
    # swapped flag restores the usual GAN orientation
    usual = float(disc_loss(t(eps), t(1 - eps), swapped=True))
    assert usual < 1e-5


def test_smooth_l1_piecewise():
    xs = torch.tensor([0.0, 0.5, -0.5, 1.0, 2.0, -3.0], dtype=torch.float64)
    want = [0.0, 0.125, 0.125, 0.5, 1.5, 2.5]
    np.testing.assert_allclose(smooth_l1(xs).numpy(), want, atol=1e-12)


def test_reg_loss_three_term_oracle():
    rng = np.random.default_rng(7)
    for _ in range(8):
        pb = rng.uniform(5, 60, size=3)
        tb = rng.uniform(5, 60, size=3)
        h, w = 48, 64
        norm = np.array([w, h, max(h, w)], dtype=float)
        d = pb / norm - tb / norm
        want = sum(0.5 * x * x if abs(x) < 1 else abs(x) - 0.5 for x in d)
        got = float(reg_loss(torch.tensor(pb), torch.tensor(tb), (h, w)))
        assert abs(got - want) < 1e-9


def test_cls_loss_picks_target_entry():
    probs = torch.tensor([0.2, 0.5, 0.3], dtype=torch.float64)
    assert abs(float(cls_loss(probs, 1)) + math.log(0.5)) < 1e-12
    assert abs(float(cls_loss(probs, 0)) + math.log(0.2)) < 1e-12


def test_seg_loss_composition():
    pred = torch.rand(4, 4, dtype=torch.float64) * 0.8 + 0.1
    target = (torch.rand(4, 4) < 0.5).double()
    base = float(pix_ce(pred, target))
    assert float(seg_loss(pred, target)) == pytest.approx(base)
    w = LossWeights(lambda1=0.0)
    assert float(seg_loss(pred, target, adv_score=torch.tensor(0.4), weights=w)) == pytest.approx(base)
    got = float(seg_loss(pred, target, adv_score=torch.tensor(0.4)))
    assert got == pytest.approx(base - math.log(0.4))
    # near-perfect prediction scored real -> near-zero loss
    tiny = float(seg_loss(target.clamp(1e-9, 1 - 1e-9), target, adv_score=torch.tensor(1.0 - 1e-9)))
    assert tiny < 1e-4


def test_det_loss_three_terms_and_cls0_gate():
    probs = torch.tensor([0.1, 0.7, 0.2], dtype=torch.float64)
    pb = torch.tensor([20.0, 30.0, 10.0], dtype=torch.float64)
    tb = torch.tensor([24.0, 28.0, 12.0], dtype=torch.float64)
    adv = torch.tensor(0.6, dtype=torch.float64)
    want = (-math.log(0.7) + float(reg_loss(pb, tb, (64, 64))) - math.log(0.6))
    got = float(det_loss(probs, 1, pb, tb, (64, 64), adv_score=adv))
    assert abs(got - want) < 1e-9
    # background slice contributes no box term
    bg = float(det_loss(torch.tensor([0.8, 0.1, 0.1], dtype=torch.float64), 0, pb, tb, (64, 64)))
    assert abs(bg + math.log(0.8)) < 1e-9
    w = LossWeights(lambda2=2.0, lambda3=0.5)
    got2 = float(det_loss(probs, 2, pb, tb, (64, 64), adv_score=adv, weights=w))
    want2 = -math.log(0.2) + 2.0 * float(reg_loss(pb, tb, (64, 64))) + 0.5 * (-math.log(0.6))
    assert abs(got2 - want2) < 1e-9


def _fd_check(fn, x0, h=1e-6, tol=1e-3):
    x = x0.clone().requires_grad_(True)
    fn(x).backward()
    g = x.grad.flatten()
    flat = x0.flatten()
    for i in range(flat.numel()):
        up, dn = flat.clone(), flat.clone()
        up[i] += h
        dn[i] -= h
        fd = (float(fn(up.view_as(x0))) - float(fn(dn.view_as(x0)))) / (2 * h)
        rel = abs(fd - float(g[i])) / max(abs(fd), 1e-8)
        assert rel < tol, f"index {i}: analytic {float(g[i])} vs fd {fd}"


def test_gradients_match_finite_differences():
    torch.manual_seed(0)
    target = (torch.rand(3, 3) < 0.5).double()
    _fd_check(lambda p: pix_ce(p, target), torch.rand(3, 3, dtype=torch.float64) * 0.8 + 0.1)
    _fd_check(lambda s: adv_loss(s, 1), torch.tensor([0.37], dtype=torch.float64))
    _fd_check(lambda s: adv_loss(s, 0), torch.tensor([0.62], dtype=torch.float64))
    tb = torch.tensor([24.0, 28.0, 12.0], dtype=torch.float64)
    _fd_check(lambda b: reg_loss(b, tb, (64, 64)),
              torch.tensor([20.0, 30.0, 10.0], dtype=torch.float64))
