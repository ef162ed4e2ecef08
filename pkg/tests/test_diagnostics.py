from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confinedflow import diagnostics as diag
from confinedflow.dynamics import IntegratorConfig, Trajectory, simulate
from confinedflow.energy import EnergyModel, ExternalPotential
from confinedflow.geometry import make_disk
from confinedflow.scenarios import constant_force_benchmark

UNIT = make_disk((0.0, 0.0), 1.0)
FREE = EnergyModel()


def synthetic(positions, flags=None, energy=None, scheme="projected_rk4", k=None,
              model=FREE, max_force_norm=None):
    """Trajectory built by hand, with recorded quantities filled in from ``model``."""
    P = np.asarray(positions, dtype=float)
    m = len(P)
    times = np.arange(m, dtype=float)
    if flags is None:
        flags = np.zeros(P.shape[:2], dtype=bool)
    if energy is None:
        energy = np.array([model.energy(X) for X in P])
    cfg = IntegratorConfig(scheme, 0.01 if k else 0.5, penalty_k=k)
    mf = np.array([np.linalg.norm(model.forces(X), axis=1).max() for X in P])
    return Trajectory(times, P, np.asarray(flags), np.asarray(energy, dtype=float),
                      np.zeros(m), mf, cfg,
                      float(mf.max()) if max_force_norm is None else max_force_norm)


# -- energy decay ------------------------------------------------------------------------------

def test_energy_decay_constant_trajectory_passes_with_zero_violation():
    X = np.tile([[0.2, 0.0]], (5, 1, 1))
    r = diag.check_energy_decay(synthetic(X, model=EnergyModel()))
    assert r.passed and r.measured == 0.0


def test_energy_decay_flags_increase_events():
    X = np.tile([[0.2, 0.0], [-0.2, 0.0]], (4, 1, 1))
    r = diag.check_energy_decay(synthetic(X, energy=[3.0, 2.0, 2.5, 1.0]))
    assert not r.passed
    assert r.offending == [2]
    assert r.measured == pytest.approx(0.25)
    assert r.extra["n_increase_events"] == 1


def test_energy_decay_tolerance_is_relative():
    X = np.tile([[0.2, 0.0], [-0.2, 0.0]], (3, 1, 1))
    assert diag.check_energy_decay(synthetic(X, energy=[1e4, 1e4 + 5e-5, 1e4])).passed
    assert not diag.check_energy_decay(synthetic(X, energy=[1e4, 1e4 + 5e-3, 1e4])).passed


def test_energy_decay_on_small_disk_run():
    rng = np.random.default_rng(0)
    X0 = rng.uniform(-0.5, 0.5, (25, 2))
    traj = simulate(UNIT, FREE, X0, IntegratorConfig(dt=0.5), 60.0)
    assert diag.check_energy_decay(traj).passed


# -- separation --------------------------------------------------------------------------------------

def test_separation_two_particles_attains_bound():
    # n = 2: the threshold equals the pair distance, up to rounding
    X = np.array([[[0.66196664, -0.27810667], [0.40547861, 0.72023757]]])
    r = diag.check_separation(synthetic(X), FREE)
    assert r.passed and r.measured == pytest.approx(1.0, rel=1e-14)


def test_separation_passes_on_finite_energy_frames():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, (6, 12, 2))
    r = diag.check_separation(synthetic(X), FREE)
    assert r.passed and r.measured >= 1.0


def test_separation_fails_on_coincident_pair():
    X = np.array([[[0.0, 0.0], [0.5, 0.0]], [[0.1, 0.1], [0.1, 0.1]]])
    traj = synthetic(X[:1])
    traj = replace(traj, times=np.arange(2.0), positions=X, flags=np.zeros((2, 2), bool),
                   energy=np.array([1.0, np.inf]), min_separation=np.zeros(2),
                   max_force=np.zeros(2))
    r = diag.check_separation(traj, FREE)
    assert not r.passed and r.offending == [1]


def test_separation_skipped_for_negative_external():
    model = EnergyModel(external=ExternalPotential((-0.002, 0.0)))
    X = np.array([[[0.5, 0.2], [0.1, 0.3]]])
    r = diag.check_separation(synthetic(X, model=model), model)
    assert r.skipped and r.passed


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(0, 10_000))
def test_separation_never_fails_with_finite_energy(n, seed):
    X = np.random.default_rng(seed).uniform(-1, 1, (3, n, 2))
    assert diag.check_separation(synthetic(X), FREE).passed


# -- confinement --------------------------------------------------------------------------------------

def test_confinement_reports_offender():
    X = np.array([[[0.0, 0.0], [0.5, 0.0]], [[0.0, 0.0], [1.0 + 1e-6, 0.0]]])
    r = diag.check_confinement(synthetic(X), UNIT)
    assert not r.passed and r.offending == [(1, 1)]
    assert r.measured == pytest.approx(1e-6)


# -- contact events ----------------------------------------------------------------------------------

def test_no_contact_events_for_interior_trajectory():
    model = EnergyModel(external=ExternalPotential((-0.01, 0.0)))
    traj = simulate(UNIT, model, [[0.0, 0.0]], IntegratorConfig(dt=0.5), 2.0)
    assert not traj.flags.any()
    assert diag.detect_contact_events(traj, UNIT, model) == []
    assert diag.check_boundary_sign(traj, UNIT, model).passed


def test_constant_outward_force_gives_one_attach_and_no_detach():
    b = constant_force_benchmark()
    traj = simulate(b.domain, b.model, b.X0, IntegratorConfig(dt=0.01), 2.0)
    events = diag.detect_contact_events(traj, b.domain, b.model)
    assert [e.kind for e in events] == ["attach"]
    assert events[0].normal_force == pytest.approx(0.5)


def test_events_alternate_per_particle():
    rng = np.random.default_rng(3)
    X0 = rng.uniform(-0.6, 0.6, (30, 2))
    model = EnergyModel(external=ExternalPotential((0.0, 0.05)))
    traj = simulate(UNIT, model, X0, IntegratorConfig(dt=0.5), 100.0)
    events = diag.detect_contact_events(traj, UNIT, model)
    for i in range(30):
        kinds = [e.kind for e in events if e.particle == i]
        expected = "detach" if traj.flags[0, i] else "attach"
        for k in kinds:
            assert k == expected
            expected = "attach" if k == "detach" else "detach"


def test_boundary_sign_counterexample_fails():
    # particle flagged on the boundary in two consecutive frames, force pointing inward
    model = EnergyModel(external=ExternalPotential((0.5, 0.0)))  # force (-0.5, 0)
    X = np.tile([[1.0, 0.0]], (2, 1, 1))
    traj = synthetic(X, flags=np.ones((2, 1), bool), model=model)
    r = diag.check_boundary_sign(traj, UNIT, model)
    assert not r.passed and r.offending == [(0, 0)]
    assert r.measured == pytest.approx(-0.5)


def test_boundary_sign_equilibrium_crowd_passes():
    X0 = np.random.default_rng(4).uniform(-0.5, 0.5, (20, 2))
    traj = simulate(UNIT, FREE, X0, IntegratorConfig(dt=0.5), 200.0)
    assert traj.flags[-1].sum() >= 10
    assert diag.check_boundary_sign(traj, UNIT, FREE).passed


def test_detachment_tangency_threshold():
    ev = [diag.ContactEvent(0, 3, "detach", 0.05, 1.0), diag.ContactEvent(1, 4, "attach", 0.9, 1.0)]
    assert diag.check_detachment_tangency(ev).passed
    ev.append(diag.ContactEvent(2, 5, "detach", -0.2, 1.0))
    r = diag.check_detachment_tangency(ev)
    assert not r.passed and r.offending == [(5, 2)]


# -- penalty checks -----------------------------------------------------------------------------

@pytest.mark.parametrize("k", [10.0, 100.0])
def test_penalty_bounds_on_benchmark(k):
    b = constant_force_benchmark()
    traj = simulate(b.domain, b.model, b.X0, IntegratorConfig("penalty_euler", 0.1 / k,
                                                              penalty_k=k), b.T)
    assert diag.penetration_bound_check(traj, b.domain).passed
    v = diag.velocity_bound_check(traj)
    assert v.passed and v.measured <= 2 * 0.5 * 1.05


def test_velocity_bound_zero_force_is_zero():
    model = EnergyModel(external=ExternalPotential())
    traj = simulate(UNIT, model, [[0.3, 0.0]], IntegratorConfig("penalty_euler", 0.01,
                                                               penalty_k=10.0), 0.2)
    assert diag.velocity_bound_check(traj).measured == 0.0


def test_velocity_bound_interior_flow_below_max_force():
    traj = simulate(UNIT, FREE, [[0.3, 0.0], [-0.3, 0.0]],
                    IntegratorConfig("penalty_euler", 0.01, penalty_k=10.0), 0.2)
    r = diag.velocity_bound_check(traj)
    assert r.measured <= traj.max_force_norm * (1 + 1e-12)


def test_penalty_checks_skip_projected_runs():
    traj = simulate(UNIT, FREE, [[0.3, 0.0], [-0.3, 0.0]], IntegratorConfig(), 1.0)
    assert diag.velocity_bound_check(traj).skipped
    assert diag.penetration_bound_check(traj, UNIT).skipped


def test_convergence_study_decreasing_and_first_order():
    b = constant_force_benchmark()
    rows = diag.penalty_convergence_study(b.domain, b.model, b.X0, [10, 20, 40, 80], b.T)
    d = [r.sup_distance for r in rows]
    assert all(np.isfinite(d)) and all(x > 0 for x in d)
    assert all(y < x for x, y in zip(d, d[1:]))
    orders = np.log2(np.array(d[:-1]) / np.array(d[1:]))
    np.testing.assert_allclose(orders, 1.0, atol=0.3)


def test_convergence_study_interior_flow_independent_of_k():
    model = EnergyModel(external=ExternalPotential((-0.1, 0.0)))
    rows = diag.penalty_convergence_study(UNIT, model, [[0.0, 0.0]], [10, 100, 1000], 1.0,
                                          dt=1e-4)
    d = [r.sup_distance for r in rows]
    # only the Euler-vs-RK4 scheme difference remains: O(dt) and identical across k
    assert max(d) <= 1e-4
    np.testing.assert_allclose(d, d[0], rtol=1e-9)


# -- stability -----------------------------------------------------------------------------------

def test_stability_zero_perturbation_identical():
    X0 = np.random.default_rng(5).uniform(-0.5, 0.5, (6, 2))
    r = diag.stability_check(UNIT, FREE, X0, 0.0, IntegratorConfig(dt=0.5), 5.0)
    assert r.passed and r.measured == 0.0


def test_stability_free_particle_distance_constant():
    model = EnergyModel(external=ExternalPotential())
    r = diag.stability_check(UNIT, model, [[0.2, 0.1]], 1e-6, IntegratorConfig(dt=0.5), 5.0)
    assert r.passed
    assert r.extra["max_distance"] == pytest.approx(1e-6, rel=1e-9)
    assert r.extra["rate"] == pytest.approx(0.0, abs=1e-6)


def test_perturb_has_max_norm_delta_and_stays_inside():
    X0 = np.array([[0.0, 0.0], [0.999999, 0.0]])
    Y = diag.perturb(UNIT, X0, 1e-6, seed=1)
    assert np.linalg.norm(Y - X0, axis=1).max() <= 1e-6 * (1 + 1e-9)
    assert np.all(UNIT.level_set(Y) <= 0)


# -- suite plumbing -----------------------------------------------------------------------------------

def test_reports_are_pure_functions():
    X0 = np.random.default_rng(6).uniform(-0.5, 0.5, (15, 2))
    traj = simulate(UNIT, FREE, X0, IntegratorConfig(dt=0.5), 30.0)
    a = diag.run_suite(traj, UNIT, FREE)
    b = diag.run_suite(traj, UNIT, FREE)
    assert [r.as_flat() for r in a] == [r.as_flat() for r in b]
    assert diag.all_passed(a)


def test_report_line_and_flat_keys():
    r = diag.DiagnosticReport("confinement", True, 1e-16, 1e-9)
    assert r.line().startswith("[PASS] confinement")
    flat = r.as_flat()
    assert flat["confinement.pass"] is True
    assert set(flat) >= {"confinement.measured", "confinement.threshold"}


def test_all_passed_ignores_skipped():
    ok = diag.DiagnosticReport("a", True, 0.0, 1.0)
    skip = diag.DiagnosticReport("b", True, np.nan, np.nan, skipped=True)
    bad = diag.DiagnosticReport("c", False, 2.0, 1.0)
    assert diag.all_passed([ok, skip]) and not diag.all_passed([ok, bad])


def test_ordering_statistic_extremes():
    X = np.array([[0.1, 0.0], [0.9, 0.0]])
    red = np.array([True, False])
    assert diag.ordering_statistic(X, X, red, [0, 0]) == 1.0
    assert diag.ordering_statistic(X, X[::-1], red, [0, 0]) == 0.0
