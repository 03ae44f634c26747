import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmarreg import (
    BandwidthPolicy,
    HTConfig,
    MODEL_PRESETS,
    PhiCover,
    SelectionProbabilityModel,
    Smoothing,
    box_kernel,
    build_exp_cover,
    constant_phi,
    exp_phi,
    fit_ht,
    generate,
    ht_m_hat,
    ht_m_hat_weighted,
    loo_functionals,
    lp_error,
    nw_estimate,
    pi_breve,
    pi_tilde,
    select_phi_ht,
    split,
    validation_pi,
)
from nmarreg.ht import _pi_from_functionals
from nmarreg.selection import RHO_FLOOR

from _oracles import random_joint
from conftest import make_dataset

BOX = box_kernel()


def default_smoothing(n_train, d=1):
    h = BandwidthPolicy("power_rule").bandwidth(n_train, d)
    return Smoothing(kernel=BOX, h=h)


def test_loo_two_rows_uses_only_the_other():
    ds = make_dataset([[0.1], [0.2]], [0.5, -0.4], [1, 1])
    phi = exp_phi(1.0, 1.0)
    psi, eta = loo_functionals(ds, np.arange(2), BOX, 0.5, 0, phi)
    assert eta == 1.0
    assert psi == pytest.approx(math.exp(-0.4), rel=1e-14)


def test_loo_unit_phi_collapses():
    rng = np.random.default_rng(1)
    ds = make_dataset(rng.uniform(0, 1, (12, 1)), rng.uniform(-1, 1, 12), rng.integers(0, 2, 12))
    psi, eta = loo_functionals(ds, np.arange(12), BOX, 0.4, 5, constant_phi(1.0, 1.0))
    assert psi == pytest.approx(eta, abs=1e-15)


def test_loo_four_row_direct_sum():
    ds = make_dataset([[0.0], [0.1], [0.2], [0.9]], [0.5, -0.3, 0.8, 0.1], [1, 0, 1, 1])
    phi = exp_phi(1.0, 1.0)
    psi, eta = loo_functionals(ds, np.arange(4), BOX, 0.25, 1, phi)
    # window around z=0.1 with radius 0.25 holds rows 0, 2 after excluding row 1
    assert eta == pytest.approx(2 / 2, abs=1e-15)
    assert psi == pytest.approx((math.e ** 0.5 + math.e ** 0.8) / 2, rel=1e-14)


def test_loo_preconditions():
    ds = make_dataset([[0.1]], [0.5], [1])
    with pytest.raises(ValueError):
        loo_functionals(ds, np.array([0]), BOX, 0.5, 0, exp_phi(1.0, 1.0))
    ds2 = make_dataset([[0.1], [0.2], [0.3]], [0.5, 0.1, -0.2], [1, 1, 1])
    with pytest.raises(ValueError):
        loo_functionals(ds2, np.array([0, 1]), BOX, 0.5, 2, exp_phi(1.0, 1.0))


def test_pi_when_all_neighbors_observed():
    ds = make_dataset([[0.1], [0.15], [0.2]], [0.5, -0.1, 0.3], [1, 1, 1])
    assert pi_tilde(ds, np.arange(3), BOX, 0.5, 1, exp_phi(1.0, 1.0)) == 1.0
    assert pi_breve(ds, np.arange(3), BOX, 0.5, 1, exp_phi(1.0, 1.0), pi0=1e-3) == 1.0


def test_pi_functions_need_observed_row():
    ds = make_dataset([[0.1], [0.2]], [0.5, 0.1], [0, 1])
    with pytest.raises(ValueError, match="observed"):
        pi_tilde(ds, np.arange(2), BOX, 0.5, 0, exp_phi(1.0, 1.0))


def test_winsorization_frozen_numbers():
    # eta~=0.5, psi~=1e-6, pi0=1e-3, phi(y)=1
    breve = _pi_from_functionals(1e-6, 0.5, 1.0, 1e-3)
    tilde = _pi_from_functionals(1e-6, 0.5, 1.0, RHO_FLOOR)
    assert breve == pytest.approx(1.0 / (1.0 + 0.5 / 1e-3), rel=1e-13)
    assert tilde == pytest.approx(1.0 / (1.0 + 0.5 / 1e-6), rel=1e-13)
    assert breve > tilde


def test_winsorization_inactive_equality():
    # psi~ = 0.5 >= pi0: both variants coincide exactly
    assert _pi_from_functionals(0.5, 0.3, 2.0, 1e-3) == _pi_from_functionals(0.5, 0.3, 2.0, RHO_FLOOR)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(1e-12, 3.0))
@settings(max_examples=100, deadline=None)
def test_breve_dominates_tilde(psi, eta, phi_y):
    assert _pi_from_functionals(psi, eta, phi_y, 1e-3) >= _pi_from_functionals(psi, eta, phi_y, RHO_FLOOR)


def test_ht_weighted_reduces_to_nw():
    rng = np.random.default_rng(2)
    ds = make_dataset(rng.uniform(0, 1, (20, 1)), rng.uniform(-1, 1, 20), np.ones(20, dtype=int))
    xq = rng.uniform(0, 1, size=(5, 1))
    got = ht_m_hat_weighted(ds, np.arange(20), BOX, 0.4, xq, np.ones(20))
    assert np.allclose(got, nw_estimate(ds, BOX, 0.4, xq), atol=1e-14)


def test_ht_weighted_five_row_oracle():
    ds = make_dataset([[0.0], [0.1], [0.2], [0.3], [2.0]],
                      [0.5, -0.4, 0.8, 0.1, 0.9], [1, 1, 0, 1, 1], L=1.0)
    pi_vals = np.array([0.5, 0.8, 1.0, 0.25, 0.9])
    got = ht_m_hat_weighted(ds, np.arange(5), BOX, 0.35, np.array([0.15]), pi_vals)
    want = (0.5 / 0.5 - 0.4 / 0.8 + 0 + 0.1 / 0.25) / 4.0
    assert got == pytest.approx(want, rel=1e-14)


def test_ht_weighted_clip_bound():
    ds = make_dataset([[0.0], [0.1]], [0.9, 0.8], [1, 1], L=1.0)
    raw = ht_m_hat_weighted(ds, np.arange(2), BOX, 0.5, np.array([0.05]), np.array([1e-4, 1e-4]))
    clipped = ht_m_hat_weighted(ds, np.arange(2), BOX, 0.5, np.array([0.05]),
                                np.array([1e-4, 1e-4]), clip_bound=100.0)
    assert raw > 1000 and clipped == 100.0


def test_exact_pi_enumeration_recovers_regression():
    # E[Delta*Y/pi(Z,Y) | X=x] == E[Y | X=x], exactly, on finite joints
    rng = np.random.default_rng(3)
    for _ in range(25):
        joint = random_joint(rng, max_x=3, max_y=4)
        pi = joint.pi_values()
        x0 = joint.xs[0]
        at = np.all(joint.xs == x0[None, :], axis=1)
        p = joint.probs[at] / joint.probs[at].sum()
        lhs = np.sum(p * pi[at] * joint.ys[at] / pi[at])
        rhs = np.sum(p * joint.ys[at])
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_ht_m_hat_with_loo_model_matches_rowwise_public_ops():
    rng = np.random.default_rng(4)
    n = 30
    ds = make_dataset(rng.uniform(0, 1, (n, 1)), rng.uniform(-1, 1, n), rng.integers(0, 2, n))
    train = np.arange(n)
    phi = exp_phi(0.8, 1.0)
    model = SelectionProbabilityModel(kind="loo_breve", kernel=BOX, lam=0.3, phi=phi, pi0=1e-3)
    xq = np.array([[0.4], [0.7]])
    got = ht_m_hat(ds, train, BOX, 0.3, xq, model)
    pi_vals = np.array([
        pi_breve(ds, train, BOX, 0.3, i, phi, 1e-3) if ds.delta[i] == 1 else 1.0
        for i in range(n)
    ])
    want = ht_m_hat_weighted(ds, train, BOX, 0.3, xq, pi_vals, clip_bound=ds.L / 1e-3)
    assert np.allclose(got, want, atol=1e-12)


def test_ht_m_hat_step1_plug_in_kind():
    # the non-leave-one-out kind builds probabilities from full training sums
    rng = np.random.default_rng(40)
    n = 40
    ds = make_dataset(rng.uniform(0, 1, (n, 1)), rng.uniform(-1, 1, n), rng.integers(0, 2, n))
    phi = exp_phi(0.5, 1.0)
    model = SelectionProbabilityModel(kind="plug_in_step1", kernel=BOX, lam=0.3, phi=phi, pi0=1e-3)
    got = ht_m_hat(ds, np.arange(n), BOX, 0.3, np.array([[0.5]]), model)
    from nmarreg import pi_hat
    pi_vals = np.array([
        pi_hat(ds, np.arange(n), BOX, 0.3, ds.z[i], ds.y_safe[i], phi) if ds.delta[i] == 1 else 1.0
        for i in range(n)])
    want = ht_m_hat_weighted(ds, np.arange(n), BOX, 0.3, np.array([[0.5]]), pi_vals,
                             clip_bound=ds.L / 1e-3)
    assert np.allclose(got, want, atol=1e-12)
    with pytest.raises(ValueError):
        SelectionProbabilityModel(kind="loo_breve", kernel=BOX, lam=0.3, phi=phi)  # needs pi0
    with pytest.raises(ValueError):
        SelectionProbabilityModel(kind="mystery", kernel=BOX, lam=0.3, phi=phi)


def test_select_phi_ht_singleton_and_variant_identity():
    rng = np.random.default_rng(5)
    # dense, fully populated windows keep psi~ far above pi0
    ds = make_dataset(rng.uniform(0, 1, (200, 1)), rng.uniform(-1, 1, 200),
                      rng.integers(0, 2, 200))
    parts = split(ds, 0.5, 1)
    sm = default_smoothing(len(parts.train))
    single = PhiCover(members=(exp_phi(0.5, 1.0),), epsilon=0.5, class_spec="one")
    res = select_phi_ht(ds, parts, single, HTConfig(smoothing=sm, variant="tilde"))
    assert res.chosen_index == 0

    cover = build_exp_cover(1.0, 1.0, 0.6)
    tilde = select_phi_ht(ds, parts, cover, HTConfig(smoothing=sm, variant="tilde", pi0=1e-3))
    breve = select_phi_ht(ds, parts, cover, HTConfig(smoothing=sm, variant="breve", pi0=1e-3))
    assert tilde.chosen_index == breve.chosen_index
    assert np.array_equal(tilde.risks, breve.risks)  # winsorization inactive


def test_validation_pi_consistent_with_selection_risks():
    rng = np.random.default_rng(6)
    ds = make_dataset(rng.uniform(0, 1, (100, 1)), rng.uniform(-1, 1, 100),
                      rng.integers(0, 2, 100))
    parts = split(ds, 0.5, 2)
    sm = default_smoothing(len(parts.train))
    phi = exp_phi(0.7, 1.0)
    config = HTConfig(smoothing=sm, variant="breve", pi0=1e-3)
    cover = PhiCover(members=(phi,), epsilon=0.5, class_spec="one")
    res = select_phi_ht(ds, parts, cover, config)

    pi_model = SelectionProbabilityModel(kind="loo_breve", kernel=sm.kernel_aux,
                                         lam=sm.h_aux, phi=phi, pi0=config.pi0)
    m_val = ht_m_hat(ds, parts.train, sm.kernel, sm.h, ds.x[parts.val], pi_model)
    pi_val = validation_pi(ds, parts, sm, phi, "breve", config.pi0)
    obs = ds.delta[parts.val] == 1
    manual = np.where(obs, (m_val - ds.y_safe[parts.val]) ** 2 / pi_val, 0.0).sum() / len(parts.val)
    assert manual == pytest.approx(res.risks[0], rel=1e-12)


def test_fit_ht_reduction_and_meta():
    rng = np.random.default_rng(7)
    ds = make_dataset(rng.uniform(0, 1, (60, 1)), rng.uniform(-1, 1, 60), np.ones(60, dtype=int))
    parts = split(ds, 0.5, 3)
    sm = Smoothing(kernel=BOX, h=0.5)
    cover = build_exp_cover(1.0, 1.0, 0.7)
    est = fit_ht(ds, parts, cover, HTConfig(smoothing=sm, variant="breve"))
    xq = rng.uniform(0, 1, size=(10, 1))
    assert np.allclose(est.predictor(xq), nw_estimate(ds.subset(parts.train), BOX, 0.5, xq), atol=1e-12)
    assert est.meta["variant"] == "breve"
    assert "raw_predictor" in est.meta
    assert np.all(np.abs(est.predictor(xq)) <= ds.L)


def test_ht_weight_bound_under_winsorization():
    # |Delta Y / pi_breve| <= L (1 + B / pi0) uniformly
    rng = np.random.default_rng(8)
    model = MODEL_PRESETS["nmar_smooth"]()
    ds, _ = generate(model, 300, 9)
    parts = split(ds, 0.5, 10)
    phi = exp_phi(1.0, 1.0)
    pi0 = 1e-3
    bound = ds.L * (1.0 + math.e / pi0)
    for i in parts.train[ds.delta[parts.train] == 1][:40]:
        pi = pi_breve(ds, parts.train, BOX, 0.3, int(i), phi, pi0)
        assert abs(ds.y[i] / pi) <= bound


def test_tilde_and_breve_errors_comparable():
    # with pi0 = 1e-3 winsorization almost never binds: same-seed errors match
    model = MODEL_PRESETS["nmar_smooth"]()
    ratios = []
    for rep in range(6):
        ds, _ = generate(model, 2000, [55, rep])
        parts = split(ds, 0.5, [56, rep])
        sm = default_smoothing(len(parts.train))
        cover = build_exp_cover(1.0, 1.0, 2000 ** -0.5)
        errs = {}
        for variant in ("tilde", "breve"):
            est = fit_ht(ds, parts, cover, HTConfig(smoothing=sm, variant=variant, pi0=1e-3))
            errs[variant] = lp_error(est, model, 2.0, 5000, [57, rep])
        ratios.append(errs["tilde"] / errs["breve"])
    med = float(np.median(ratios))
    assert 0.5 <= med <= 2.0
