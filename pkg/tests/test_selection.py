import math

import numpy as np
import pytest

from nmarreg import (
    BandwidthPolicy,
    MODEL_PRESETS,
    PhiCover,
    PhiFunction,
    SelectionResult,
    Smoothing,
    box_kernel,
    build_exp_cover,
    constant_phi,
    empirical_risk,
    estimate_exp_g,
    exp_phi,
    fit,
    generate,
    pi_hat,
    select_phi,
    split,
    write_risk_table,
)
from nmarreg.data import DataSplit
from nmarreg.selection import RHO_FLOOR

from _oracles import random_joint
from conftest import make_dataset

BOX = box_kernel()


def default_smoothing(n_train, d=1):
    h = BandwidthPolicy("power_rule").bandwidth(n_train, d)
    return Smoothing(kernel=BOX, h=h)


def test_exp_g_zero_when_all_observed():
    ds = make_dataset([[0.1], [0.2], [0.3]], [0.5, -0.2, 0.1], [1, 1, 1])
    assert estimate_exp_g(ds, np.arange(3), BOX, 0.5, np.array([0.2]), exp_phi(1.0, 1.0)) == 0.0


def test_exp_g_guard_when_no_observed_neighbors():
    ds = make_dataset([[0.1], [0.2], [0.3]], [0.5, -0.2, 0.1], [0, 0, 0])
    got = estimate_exp_g(ds, np.arange(3), BOX, 0.5, np.array([0.2]), exp_phi(1.0, 1.0))
    assert got == pytest.approx(3.0 / RHO_FLOOR)


def test_exp_g_four_row_direct_sum():
    ds = make_dataset([[0.0], [0.1], [0.2], [0.3]], [0.5, -0.3, 0.8, 0.2], [1, 0, 1, 1])
    phi = exp_phi(1.0, 1.0)
    got = estimate_exp_g(ds, np.arange(4), BOX, 0.5, np.array([0.15]), phi)
    want = 1.0 / (math.e ** 0.5 + math.e ** 0.8 + math.e ** 0.2)
    assert got == pytest.approx(want, rel=1e-13)


def test_pi_hat_extremes():
    all_obs = make_dataset([[0.1], [0.2]], [0.5, -0.2], [1, 1])
    phi = exp_phi(1.0, 1.0)
    assert pi_hat(all_obs, np.arange(2), BOX, 0.5, np.array([0.15]), 0.3, phi) == 1.0
    # one observed at y=0 and one missing inside the window: exp_g = 1/phi(0) = 1
    half = make_dataset([[0.1], [0.2]], [0.0, 0.4], [1, 0])
    got = pi_hat(half, np.arange(2), BOX, 0.5, np.array([0.15]), 0.0, constant_phi(1.0, 1.0))
    assert got == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        pi_hat(all_obs, np.arange(2), BOX, 0.5, np.array([0.15]), 1.5, phi)


def test_pi_hat_recovers_population_value():
    # g == 0 with phi* = e^y: pi(z, 1) = 1/(1+e); kernel estimate lands within 0.05
    model_pi_min = 1.0 / (1.0 + math.exp(0.0) * math.exp(0.75))
    from nmarreg import SyntheticModel
    model = SyntheticModel(
        d=1, z_coords=(1,), L=1.0, task="regression",
        m_true=lambda x: 0.4 * x[:, 0] - 0.2,
        g_true=lambda z: np.zeros(len(z)),
        phi_star=np.exp,
        noise_halfwidth=0.55, m_lo=-0.2, m_hi=0.2,
        pi_min=model_pi_min, name="flat_g",
    )
    ds, _ = generate(model, 8000, 31)
    lam = BandwidthPolicy("power_rule").bandwidth(8000, 1)
    got = pi_hat(ds, np.arange(8000), BOX, lam, np.array([0.5]), 1.0, exp_phi(1.0, 1.0))
    assert abs(got - 1.0 / (1.0 + math.e)) < 0.05


def test_empirical_risk_zero_cases():
    # every validation response missing -> empty observed sum
    ds = make_dataset([[0.1], [0.2], [0.3], [0.4]], [0.5, -0.2, 0.1, 0.3], [1, 1, 0, 0])
    parts = DataSplit.from_indices(train=[0, 1], val=[2, 3])
    sm = Smoothing(kernel=BOX, h=0.5)
    assert empirical_risk(ds, parts, sm, exp_phi(0.5, 1.0)) == 0.0
    # perfect predictor with unit weights
    const = make_dataset([[0.1], [0.2], [0.3], [0.4]], [0.3, 0.3, 0.3, 0.3], [1, 1, 1, 1])
    assert empirical_risk(const, parts, sm, exp_phi(0.5, 1.0)) == pytest.approx(0.0, abs=1e-28)


def test_empirical_risk_six_row_hand_oracle():
    ds = make_dataset([[0.0], [0.2], [0.4], [0.1], [0.3], [0.9]],
                      [0.5, -0.4, 0.8, 0.2, np.nan, 0.6],
                      [1, 1, 1, 1, 0, 1])
    parts = DataSplit.from_indices(train=[0, 1, 2], val=[3, 4, 5])
    phi = exp_phi(1.0, 1.0)
    h = 0.5
    sm = Smoothing(kernel=BOX, h=h)
    got = empirical_risk(ds, parts, sm, phi)

    # independent term-by-term enumeration over the 3 validation rows
    from _oracles import kernel_ratio, m_phi_oracle
    total = 0.0
    train_x = ds.x[:3]
    train_y = ds.y[:3]
    train_d = ds.delta[:3]
    for i in (3, 4, 5):
        if ds.delta[i] == 0:
            continue
        m_i = m_phi_oracle("box", h, train_x, train_y, train_d, phi, [ds.x[i, 0]], L=1.0)
        num = kernel_ratio("box", h, train_x, [1 - d for d in train_d], [ds.x[i, 0]])
        den_terms = [d * phi(np.array([y]))[0] for d, y in zip(train_d, train_y)]
        den = kernel_ratio("box", h, train_x, den_terms, [ds.x[i, 0]])
        exp_g = num / max(den, RHO_FLOOR)
        pi = 1.0 / (1.0 + exp_g * phi(np.array([ds.y[i]]))[0])
        total += (m_i - ds.y[i]) ** 2 / pi
    assert got == pytest.approx(total / 3.0, rel=1e-12)


def test_select_phi_singleton_and_ties():
    rng = np.random.default_rng(41)
    ds = make_dataset(rng.uniform(0, 1, (30, 1)), rng.uniform(-1, 1, 30), rng.integers(0, 2, 30))
    parts = split(ds, 0.5, 3)
    sm = default_smoothing(len(parts.train))
    single = PhiCover(members=(exp_phi(0.3, 1.0),), epsilon=0.5, class_spec="one")
    res = select_phi(ds, parts, single, sm)
    assert res.chosen_index == 0
    twin = PhiCover(members=(exp_phi(0.3, 1.0), exp_phi(0.3, 1.0)), epsilon=0.5, class_spec="twins")
    res2 = select_phi(ds, parts, twin, sm)
    assert res2.chosen_index == 0  # first index on exact ties
    assert res2.risks[0] == res2.risks[1]


def test_select_phi_matches_reference_risks():
    rng = np.random.default_rng(42)
    ds = make_dataset(rng.uniform(0, 1, (80, 1)), rng.uniform(-1, 1, 80), rng.integers(0, 2, 80))
    parts = split(ds, 0.5, 4)
    sm = default_smoothing(len(parts.train))
    cover = build_exp_cover(1.0, 1.0, 0.4)
    res = select_phi(ds, parts, cover, sm)
    reference = np.array([empirical_risk(ds, parts, sm, phi) for phi in cover])
    assert np.allclose(res.risks, reference, rtol=1e-12, atol=1e-15)
    assert res.chosen_index == int(np.argmin(reference))


def test_risks_invariant_to_validation_row_order():
    rng = np.random.default_rng(43)
    ds = make_dataset(rng.uniform(0, 1, (60, 1)), rng.uniform(-1, 1, 60), rng.integers(0, 2, 60))
    base = split(ds, 0.5, 5)
    perm = np.random.default_rng(0).permutation(len(base.val))
    shuffled = DataSplit(n=ds.n, train=base.train[::-1].copy(), val=base.val[perm], alpha=0.5)
    sm = default_smoothing(len(base.train))
    cover = build_exp_cover(1.0, 1.0, 0.7)
    a = select_phi(ds, base, cover, sm)
    b = select_phi(ds, shuffled, cover, sm)
    assert np.array_equal(a.risks, b.risks)


def test_inverse_weight_unbiased_at_truth_by_enumeration():
    # E[Delta/pi_{phi*} * |f(X)-Y|^2] == E[|f(X)-Y|^2] exactly, any f
    rng = np.random.default_rng(44)
    for _ in range(10):
        joint = random_joint(rng, max_x=4, max_y=3)
        pi = joint.pi_values()
        gamma = rng.uniform(-1, 1)
        # f depends on x through an arbitrary member curve
        f_vals = np.tanh(gamma * joint.xs[:, 0])
        weighted = np.sum(joint.probs * pi * (1.0 / pi) * (f_vals - joint.ys) ** 2)
        plain = np.sum(joint.probs * (f_vals - joint.ys) ** 2)
        assert weighted == pytest.approx(plain, abs=1e-12)


def test_selection_lands_near_population_optimum():
    # seeded identified run: the chosen member's population risk sits within
    # the cover-granularity slack of the cover-wide minimum
    model = MODEL_PRESETS["linear_class"]()
    n = 8000
    ds, _ = generate(model, n, [71, 0])
    parts = split(ds, 0.5, [71, 1])
    sm = default_smoothing(len(parts.train))
    cover = build_exp_cover(1.0, 1.0, 0.25)
    res = select_phi(ds, parts, cover, sm)

    # population risks by exact two-point enumeration per x-quadrature node
    from numpy.polynomial.legendre import leggauss
    xg, wx = leggauss(200)
    xs = 0.5 * (xg + 1)
    wxs = wx * 0.5
    p1 = xs
    gz = xs - 2.0
    pi0 = 1 / (1 + np.exp(gz))
    pi1 = 1 / (1 + np.exp(gz) * math.e)
    pop = []
    for gamma in cover.gammas:
        phi1 = math.exp(gamma)
        eta1 = pi1 * p1
        eta2 = pi0 * (1 - p1) + pi1 * p1
        psi1 = pi1 * phi1 * p1
        psi2 = pi0 * (1 - p1) + pi1 * phi1 * p1
        m_g = eta1 + psi1 / psi2 * (1 - eta2)
        risk = np.sum((m_g ** 2 * (1 - p1) + (m_g - 1) ** 2 * p1) * wxs)
        pop.append(float(risk))
    pop = np.array(pop)
    sup_dist = np.array([
        max(abs(np.exp(g * 1.0) - np.exp(gs * 1.0)), abs(np.exp(-g) - np.exp(-gs)))
        for g, gs in zip(cover.gammas[:-1], cover.gammas[1:])])
    lipschitz = np.max(np.abs(np.diff(pop)) / sup_dist)
    slack = 2 * lipschitz * cover.epsilon
    assert pop[res.chosen_index] <= pop.min() + slack + 1e-12


@pytest.mark.xfail(
    strict=False,
    reason="the selection criterion's population landscape is nearly flat "
    "around the truth, so the chosen member cannot concentrate within eps_n "
    "of the constant at practical sample sizes (README, Known limitations)",
)
def test_mar_selects_near_constant_example():
    model = MODEL_PRESETS["mar"]()
    cover = build_exp_cover(1.0, 1.0, math.e)  # contains the constant at index 1
    hits = 0
    reps = 20
    for rep in range(reps):
        ds, _ = generate(model, 4000, [81, rep, 0])
        parts = split(ds, 0.5, [81, rep, 1])
        res = select_phi(ds, parts, cover, default_smoothing(len(parts.train)))
        chosen_gamma = cover.gammas[res.chosen_index]
        hits += math.exp(abs(chosen_gamma)) - 1 <= 4000 ** -0.5
    assert hits >= 0.9 * reps


def test_fit_metadata_and_export(tmp_path):
    rng = np.random.default_rng(45)
    ds = make_dataset(rng.uniform(0, 1, (60, 1)), rng.uniform(-1, 1, 60), rng.integers(0, 2, 60))
    parts = split(ds, 0.5, 6)
    sm = default_smoothing(len(parts.train))
    cover = build_exp_cover(1.0, 1.0, 0.7)
    est = fit(ds, parts, cover, sm)
    assert est.meta["estimator"] == "select_phi"
    assert 0 <= est.meta["chosen_index"] < len(cover)
    assert len(est.meta["risks"]) == len(cover)
    preds = est.predictor(rng.uniform(0, 1, size=(20, 1)))
    assert np.all(np.abs(preds) <= ds.L)

    res = SelectionResult(chosen_index=int(np.argmin(est.meta["risks"])),
                          chosen_phi=cover.members[est.meta["chosen_index"]],
                          risks=est.meta["risks"])
    out = tmp_path / "risks.csv"
    write_risk_table(out, cover, res)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "phi_index,gamma_or_tag,risk"
    assert len(lines) == len(cover) + 1
    out2 = tmp_path / "risks_ht.csv"
    write_risk_table(out2, cover, res, variant="breve")
    assert out2.read_text().splitlines()[0] == "phi_index,gamma_or_tag,risk,variant"


def test_selection_result_validates_argmin():
    with pytest.raises(ValueError):
        SelectionResult(chosen_index=1, chosen_phi=exp_phi(0.0, 1.0), risks=np.array([1.0, 2.0]))
