import numpy as np
import pytest

from oracles import dual_norm_lp
from specflow import (
    bonforte_figalli_check,
    custom,
    dual_norm,
    evaluate_J,
    extinction_identities,
    extinction_profile,
    extinction_time,
    grid_divergence,
    ground_state,
    is_eigenvector,
    l1,
    linf,
    membership_in_K,
    nullspace_project,
    poincare_constant,
    run_event_driven,
    tv1d,
    tv1d_dirichlet,
)
from specflow.extinction import GroundStateOptions, NotExtinctError
from specflow.flow import FlowAbort, FlowOptions
from specflow.gallery import gallery


def test_extinction_time_examples():
    f = np.array([1.0, 1, -1, -1])
    assert extinction_time(run_event_driven(tv1d(4), f)) == pytest.approx(2.0)
    assert extinction_time(run_event_driven(l1(3), [2, -1, 0])) == pytest.approx(2.0)
    assert extinction_time(run_event_driven(tv1d(3), [4.0, 4, 4])) == 0.0
    with pytest.raises(FlowAbort) as exc:
        run_event_driven(tv1d(6), [4.0, 1, 3, 0, 2, 5], FlowOptions(max_events=1))
    with pytest.raises(NotExtinctError):
        extinction_time(exc.value.trajectory)


def test_dual_norm_examples():
    res = dual_norm(tv1d(4), [1, 1, -1, -1], certificate=True)
    assert res.value == pytest.approx(2.0) and np.allclose(res.q, [-1, -2, -1])
    assert dual_norm(linf(2), [3, 1]) == 4.0
    assert dual_norm(tv1d(4), [2.0, 2, 2, 2]) == 0.0


def test_dual_norm_against_lp():
    rng = np.random.default_rng(0)
    cases = [tv1d(9), l1(5), grid_divergence((3, 2)), tv1d_dirichlet(6),
             custom(rng.integers(-2, 3, size=(7, 4)).astype(float) + np.eye(7, 4))]
    for F in cases:
        for _ in range(5):
            f = rng.standard_normal(F.n)
            res = dual_norm(F, f, certificate=True)
            g = f - nullspace_project(F, f)
            ref = dual_norm_lp(F.A, g)
            assert res.value == pytest.approx(ref, rel=1e-8, abs=1e-9)
            assert np.linalg.norm(F.A.T @ res.q - g) <= 1e-8 * (1 + np.linalg.norm(f))
            assert np.max(np.abs(res.q)) <= res.value + 1e-9 * (1 + np.linalg.norm(f))


def test_ground_state_examples():
    gs = ground_state(tv1d(2))
    assert gs.lam == pytest.approx(np.sqrt(2)) and gs.certified
    assert np.allclose(np.abs(gs.u), 1 / np.sqrt(2))
    gs = ground_state(tv1d(4))
    assert gs.lam == pytest.approx(1.0)
    assert abs(abs(gs.u @ np.array([1, 1, -1, -1]) / 2) - 1) < 1e-9
    gs = ground_state(l1(5))
    assert gs.lam == pytest.approx(1.0) and np.count_nonzero(np.abs(gs.u) > 1e-12) == 1
    assert ground_state(linf(9)).lam == pytest.approx(1 / 3)
    C, cert = poincare_constant(tv1d(4))
    assert C == pytest.approx(1.0) and cert


@pytest.mark.parametrize("F", [tv1d(7), l1(4), grid_divergence((2, 2)), tv1d_dirichlet(5),
                               custom([[1.0, -1, 0, 0], [0, 1, -1, 0], [0, 0, 1, -1], [1, 0, 0, -1]])],
                         ids=lambda F: F.label or F.tag)
def test_ground_state_eigenpair_and_minimality(F):
    gs = ground_state(F)
    member, sub = membership_in_K(F, gs.lam * gs.u)
    assert member and is_eigenvector(F, sub)[0]
    rng = np.random.default_rng(1)
    for _ in range(500):
        u = rng.standard_normal(F.n)
        u -= nullspace_project(F, u)
        assert evaluate_J(F, u) / np.linalg.norm(u) >= gs.lam - 1e-9


def test_inverse_power_matches_enumeration():
    F = custom([[1.0, -1, 0, 0, 0], [0, 1, -1, 0, 0], [0, 0, 1, -1, 0], [0, 0, 0, 1, -1],
                [1, 0, 0, 0, -1], [1, 0, -1, 0, 0]])
    exact = ground_state(F)
    best = ground_state(F, GroundStateOptions(enum_limit=0, starts=64))
    assert exact.certified and not best.certified
    assert best.lam == pytest.approx(exact.lam, rel=1e-8)


def test_profile_examples():
    p, diag = extinction_profile(run_event_driven(l1(3), [2, -1, 0]))
    assert np.allclose(p, [1, 0, 0]) and diag["eigen_defect"] == 0
    f = np.array([1.0, 1, -1, -1])
    p, _ = extinction_profile(run_event_driven(tv1d(4), f))
    assert np.allclose(p, 0.5 * f)
    p, diag = extinction_profile(run_event_driven(linf(2), [3, 1]))
    assert np.allclose(p, [0.5, 0.5]) and max(diag["p_minus_w"]) < 1e-12
    with pytest.raises(NotExtinctError):
        extinction_profile(run_event_driven(l1(2), [0.0, 0.0]))


def test_identities_examples():
    rep = extinction_identities(linf(2), [3, 1], run_event_driven(linf(2), [3, 1]))
    assert rep.T_star == pytest.approx(4) and rep.dual_norm == 4 and rep.identity_gap < 1e-12
    assert rep.certified and rep.all_passed
    f = np.array([1.0, 1, -1, -1])
    rep = extinction_identities(tv1d(4), f, run_event_driven(tv1d(4), f), strict=True)
    assert rep.T_star == pytest.approx(2) and rep.dual_norm == pytest.approx(2)
    assert rep.poincare_C == pytest.approx(1) and rep.upper_slack == pytest.approx(0, abs=1e-12)
    rep = extinction_identities(tv1d(3), [1.0, 1, 1], run_event_driven(tv1d(3), [1.0, 1, 1]))
    assert rep.T_star == 0 and rep.dual_norm == 0


@pytest.mark.parametrize("seed", range(6))
def test_bound_chain_and_maximizer(seed):
    rng = np.random.default_rng(seed)
    for F in [tv1d(10), l1(6), linf(5), grid_divergence((2, 2))]:
        f = rng.standard_normal(F.n)
        tr = run_event_driven(F, f)
        rep = extinction_identities(F, f, tr, strict=True)
        assert rep.lower_slack >= -1e-7 and rep.upper_slack >= -1e-7
        assert abs(rep.T_star - rep.dual_norm) <= 1e-7 * max(1, rep.T_star)
        best = float(f @ rep.profile) / evaluate_J(F, rep.profile)
        for _ in range(1000 // 6):
            p = rng.standard_normal(F.n)
            p -= nullspace_project(F, p)
            assert best >= float(f @ p) / evaluate_J(F, p) - 1e-7


def test_sharpness_at_eigenvector_data():
    for F, f, lam in [(tv1d(4), np.array([1.0, 1, -1, -1]), 0.5), (l1(3), np.array([1.0, -1, 1]), 1.0),
                      (linf(3), np.array([2.0, -2, 2]), 1 / 6)]:
        tr = run_event_driven(F, f)
        assert abs(tr.T - 1 / lam) <= 1e-10 and abs(dual_norm(F, f) - 1 / lam) <= 1e-10


def test_bonforte_figalli_examples():
    _, hat = gallery("bf-hat")
    rep = bonforte_figalli_check(hat)
    assert rep["T_predicted"] == pytest.approx(1.5)
    assert rep["T_rel_error"] <= 1e-12 and rep["profile_rel_error"] <= 1e-12
    assert rep["profile_outside_max"] == 0
    n = 40
    box = np.zeros(n)
    box[10:30] = 2.0
    rep = bonforte_figalli_check(box)
    assert rep["n_segments"] == 1 and rep["T_rel_error"] < 1e-12 and rep["profile_rel_error"] < 1e-12
    assert bonforte_figalli_check(np.zeros(10))["T_measured"] == 0.0
    with pytest.raises(ValueError):
        bonforte_figalli_check(-box)
    with pytest.raises(ValueError):
        bonforte_figalli_check(np.ones(8))
