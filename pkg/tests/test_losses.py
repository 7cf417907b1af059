import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from filmrec import losses as L


def _bundle(rng, h=12, w=10):
    return {
        "m3d": rng.uniform(-1, 1, (h, w, 3)), "normal": rng.uniform(-1, 1, (h, w, 3)),
        "depth": rng.uniform(-1, 1, (h, w, 1)), "bgmask": rng.uniform(-1, 1, (h, w, 1)),
        "albedo": rng.uniform(-1, 1, (h, w, 1)), "uv": rng.uniform(-1, 1, (h, w, 2)),
        "df": rng.uniform(-1, 1, (h, w, 2)),
    }


def test_masked_l1_cases():
    g = np.zeros((2, 2, 1))
    assert L.masked_l1(g, g) == 0
    assert L.masked_l1(g + 0.2, g) == pytest.approx(0.2)
    p = np.array([[0.0, 0.1], [0.3, 0.4]])[..., None]
    assert L.masked_l1(p, g) == pytest.approx(0.2)


def test_masked_l1_respects_mask():
    p = np.array([[1.0, 0.0], [0.0, 0.0]])[..., None]
    m = np.array([[0.0, 1.0], [1.0, 1.0]])[..., None]
    assert L.masked_l1(p, np.zeros_like(p), m) == 0


def test_errors():
    z = np.zeros((2, 2, 2))
    with pytest.raises(L.ShapeMismatchError):
        L.masked_l1(z, np.zeros((2, 3, 2)))
    with pytest.raises(L.EmptyMaskError):
        L.masked_l1(z, z, np.zeros((2, 2, 1)))


def test_stats_cases(rng):
    g = rng.uniform(size=(4, 4, 2))
    s = L.deformation_stats(g, g)
    assert s.mu == (0, 0) and s.sigma == (0, 0)
    s = L.deformation_stats(g + (0.1, -0.2), g)
    np.testing.assert_allclose(s.mu, (0.1, -0.2), atol=1e-12)
    np.testing.assert_allclose(s.sigma, (0, 0), atol=1e-12)
    d = np.zeros((1, 2, 2))
    d[0, :, 0] = [-1, 1]
    s = L.deformation_stats(d, np.zeros_like(d))
    assert s.mu[0] == 0 and s.sigma[0] == pytest.approx(1.0)


def test_constant_shift_case(rng):
    g = rng.uniform(size=(5, 6, 2))
    lshift, ldisturb, ldiff = L.deformation_losses(g + 0.3, g)
    assert lshift == pytest.approx(0.6, abs=1e-9)
    assert ldisturb == pytest.approx(0, abs=1e-9) and ldiff == pytest.approx(0, abs=1e-9)
    assert L.deformation_losses(g, g) == (0, 0, 0)


def test_single_element_equality_branch():
    p = np.array([[[0.5, 0.0]]])
    lshift, _, ldiff = L.deformation_losses(p, np.zeros_like(p))
    assert lshift == pytest.approx(0.5) and ldiff == 0


def test_ldiff_hand_case():
    # channel 0 residuals {0, 0, 3}: mu = 1; only the 3 has delta*(delta-mu) > 0, contributing min(3, 2)
    p = np.zeros((1, 3, 2))
    p[0, 2, 0] = 3
    _, ldisturb, ldiff = L.deformation_losses(p, np.zeros_like(p))
    assert ldiff == pytest.approx(2 / 3)
    assert ldisturb == pytest.approx(np.sqrt(2))


def test_combine_weights():
    assert L.combine_df(0.6, 0, 0) == pytest.approx(0.6)
    assert L.combine_df(0.1, 0.05, 0.02) == pytest.approx(0.24)
    assert L.combine_df(0.1, 0.05, 0.02, L.LossWeights(0, 0)) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        L.LossWeights(-1, 2)


def test_df_loss_zero_on_identity(rng):
    g = rng.uniform(size=(3, 3, 2))
    assert L.df_loss(g, g) == 0


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, (6, 5, 2), elements=st.floats(-1, 1)),
       hnp.arrays(np.float64, (6, 5, 2), elements=st.floats(-1, 1)),
       st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_disturb_shift_invariant(p, g, c1, c2):
    _, d0, _ = L.deformation_losses(p, g)
    _, d1, _ = L.deformation_losses(p + (c1, c2), g)
    assert d1 == pytest.approx(d0, abs=1e-9)
    lshift, _, _ = L.deformation_losses(g + (c1, c2), g)
    assert lshift == pytest.approx(abs(c1) + abs(c2), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, (4, 4, 2), elements=st.floats(-1, 1)),
       hnp.arrays(np.float64, (4, 4, 2), elements=st.floats(-1, 1)))
def test_loss_terms_nonnegative_and_bounded(p, g):
    lshift, ldisturb, ldiff = L.deformation_losses(p, g)
    assert lshift >= 0 and ldisturb >= 0 and ldiff >= 0
    # per element the term is at most |delta| and at most |delta - mu|
    assert ldiff <= 2 * L.masked_l1(p, g) + 1e-12
    assert ldiff <= ldisturb + 1e-12


def test_composite_all_zero(rng):
    b = _bundle(rng)
    rep = L.composite_losses(b, b)
    assert all(v == 0 for v in rep.to_dict().values())


def test_composite_single_term(rng):
    gt = _bundle(rng)
    gt["bgmask"] = np.ones_like(gt["bgmask"])
    pred = dict(gt, m3d=gt["m3d"] + 0.1)
    rep = L.composite_losses(pred, gt)
    assert rep.lshape == pytest.approx(0.1) and rep.ltotal == pytest.approx(0.1)
    assert rep.ltrans == 0


def test_composite_identities(rng):
    rep = L.composite_losses(_bundle(rng), _bundle(rng), np.ones((12, 10, 1)))
    assert rep.lshape == pytest.approx(rep.l3d + rep.lnor + rep.ldp + rep.lbg, abs=1e-12)
    assert rep.ltrans == pytest.approx(rep.ldf + rep.luv + rep.lab, abs=1e-12)
    assert rep.ltotal == pytest.approx(rep.lshape + rep.ltrans, abs=1e-12)
    assert rep.ldf == pytest.approx(rep.lshift + 2 * rep.ldisturb + 2 * rep.ldiff, abs=1e-12)


def test_composite_missing_map(rng):
    b = _bundle(rng)
    pred = dict(b)
    del pred["uv"]
    with pytest.raises(L.MissingMapError) as e:
        L.composite_losses(pred, b)
    assert e.value.name == "uv"


def test_report_json(rng):
    rep = L.composite_losses(_bundle(rng), _bundle(rng))
    assert json.loads(rep.to_json()) == rep.to_dict()
