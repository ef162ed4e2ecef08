"""Acceptance criteria 1-10, one PASS/FAIL line each.

The lines are written straight to the terminal (bypassing capture), so
``pytest tests/test_acceptance.py`` shows them without ``-s``.  Desk runs are
shared between criteria through a module-level cache.
"""

import time

import numpy as np
import pytest

from confinedflow import diagnostics as diag
from confinedflow.dynamics import IntegratorConfig, simulate
from confinedflow.energy import EnergyModel, min_separation, model_from_spec
from confinedflow.geometry import domain_from_spec, exterior_distance
from confinedflow.scenarios import (builtin_scenarios, constant_force_benchmark, get_builtin,
                                    run_scenario, stability_benchmark)

pytestmark = pytest.mark.slow

_RUNS: dict = {}


def desk_run(name):
    if name not in _RUNS:
        cfg = get_builtin(name, desk=True)
        t0 = time.perf_counter()
        traj = run_scenario(cfg, write=False)
        _RUNS[name] = (cfg, traj, time.perf_counter() - t0)
    return _RUNS[name]


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def test_criterion_01_energy_decay(report):
    cfg, traj, seconds = desk_run("circle_case1")
    r = diag.check_energy_decay(traj)
    assert (cfg.n, cfg.integrator["dt"], cfg.T) == (100, 0.5, 300.0)
    ok = r.passed and seconds <= 60.0
    report(1, ok, f"circle_case1 desk: max rel. increase {r.measured:.3g} (tol 1e-8), "
                  f"{r.extra['n_increase_events']} events, runtime {seconds:.1f} s (limit 60 s)")


def test_criterion_02_instability_reproduction(report):
    _, unstable, _ = desk_run("circle_case2_dt3")
    _, stable, _ = desk_run("circle_case2")
    ru, rs = diag.check_energy_decay(unstable), diag.check_energy_decay(stable)
    assert unstable.meta["initial_condition"] == stable.meta["initial_condition"]
    ok = ru.extra["n_increase_events"] >= 1 and rs.extra["n_increase_events"] == 0
    report(2, ok, f"dt=3: {ru.extra['n_increase_events']} increase events "
                  f"(max rel. {ru.measured:.3g}); dt=0.5: {rs.extra['n_increase_events']} events")


def test_criterion_03_penalty_bounds(report):
    b = constant_force_benchmark()
    parts, ok = [], True
    for k in (10.0, 100.0, 1000.0):
        traj = simulate(b.domain, b.model, b.X0,
                        IntegratorConfig("penalty_euler", 0.1 / k, penalty_k=k), b.T)
        F = traj.max_force_norm
        depth = max(exterior_distance(b.domain, X).max() for X in traj.positions)
        speed = (np.linalg.norm(np.diff(traj.positions, axis=0), axis=2)
                 / np.diff(traj.times)[:, None]).max()
        ok &= depth <= F / k * 1.1 and speed <= 2 * F * 1.05
        ok &= diag.penetration_bound_check(traj, b.domain).passed
        ok &= diag.velocity_bound_check(traj).passed
        parts.append(f"k={k:g}: depth {depth:.4g} <= {F / k * 1.1:.4g}, "
                     f"speed {speed:.4g} <= {2 * F * 1.05:.4g}")
    report(3, ok, "; ".join(parts))


def test_criterion_04_penalty_convergence(report):
    b = constant_force_benchmark()
    rows = diag.penalty_convergence_study(b.domain, b.model, b.X0, [10, 1e2, 1e3, 1e4], b.T)
    d = [r.sup_distance for r in rows]
    decreasing = all(y < x for x, y in zip(d, d[1:]))
    order = diag.fitted_order(rows)
    ok = decreasing and abs(order - 1.0) <= 0.3
    report(4, ok, "sup distances " + ", ".join(f"{x:.3g}" for x in d)
           + f"; strictly decreasing={decreasing}; fitted order {order:.3f} (1.0 +/- 0.3)")


def test_criterion_05_confinement(report):
    worst, parts = 0.0, []
    for cfg in builtin_scenarios():
        if cfg.scale != "desk":
            continue
        _, traj, _ = desk_run(cfg.name)
        assert traj.integrator.scheme == "projected_rk4" and traj.error is None
        dom = domain_from_spec(cfg.domain)
        d = max(exterior_distance(dom, X).max() for X in traj.positions)
        worst = max(worst, d)
        parts.append(f"{cfg.name} {d:.2g}")
    report(5, worst <= 1e-9, f"max d_s over all frames {worst:.3g} (tol 1e-9): " + ", ".join(parts))


def test_criterion_06_gradient_consistency(report):
    model = EnergyModel()
    rng = np.random.default_rng(2024)
    worst, h, count = 0.0, 1e-6, 0
    while count < 100:
        X = rng.uniform(-1, 1, (10, 2))
        if min_separation(X) < 0.05:
            continue
        count += 1
        F = model.forces(X)
        for i in range(10):
            g = np.zeros(2)
            for a in range(2):
                Xp, Xm = X.copy(), X.copy()
                Xp[i, a] += h
                Xm[i, a] -= h
                g[a] = (model.energy(Xp) - model.energy(Xm)) / (2 * h)
            worst = max(worst, np.linalg.norm(F[i] + g) / np.linalg.norm(F[i]))
    report(6, worst <= 1e-6, f"100 configurations, n=10: max relative error {worst:.3g} (tol 1e-6)")


def test_criterion_07_separation_bound(report):
    parts, violations = [], 0
    for name in ("circle_case1", "circle_case2", "circle_case2_dt3"):
        _, traj, _ = desk_run(name)
        n = traj.n_particles
        # closed form for V = 1/r, compared without any tolerance
        h = 1.0 / (n * (n - 1) * traj.energy)
        bad = int(np.sum(~(traj.min_separation >= h)))
        violations += bad
        parts.append(f"{name}: {bad} violations, min ratio {np.min(traj.min_separation / h):.4g}")
    report(7, violations == 0, "; ".join(parts))


def test_criterion_08_detachment_tangency(report):
    cfg, traj, _ = desk_run("channel_bump")
    dom = domain_from_spec(cfg.domain)
    model = model_from_spec(cfg.potential)
    events = diag.detect_contact_events(traj, dom, model)
    det = [e for e in events if e.kind == "detach"]
    ratios = [abs(e.normal_force) / e.force_norm for e in det]
    sign = diag.check_boundary_sign(traj, dom, model)
    ok = len(det) >= 1 and max(ratios) <= 0.1 and sign.measured >= -1e-6
    where = ", ".join(f"x={traj.positions[e.frame - 1, e.particle, 0]:.2f}" for e in det)
    report(8, ok, f"{len(det)} detach events ({where}), max |F.nu|/|F| "
                  f"{max(ratios, default=float('nan')):.3g} (tol 0.1); "
                  f"min persistent F.nu {sign.measured:.3g} (tol -1e-6)")


def test_criterion_09_stability(report):
    b = stability_benchmark()
    delta = 1e-6
    cfg = IntegratorConfig(dt=0.5)
    a = simulate(b.domain, b.model, b.X0, cfg, b.T)
    p = simulate(b.domain, b.model, diag.perturb(b.domain, b.X0, delta, seed=0), cfg, b.T)
    dist = np.linalg.norm(a.positions - p.positions, axis=2).max(axis=1)
    r = diag.stability_check(b.domain, b.model, b.X0, delta, cfg, b.T)
    ok = dist.max() <= 100 * delta and r.passed
    report(9, ok, f"disk n=20, T=10: sup distance {dist.max():.3g} <= {100 * delta:.0e}; "
                  f"Gronwall check {'pass' if r.passed else 'fail'} (rate {r.extra['rate']:.3g})")


def test_criterion_10_boundary_crowding(report):
    _, traj, _ = desk_run("circle_case1")
    frac = float(np.mean(np.linalg.norm(traj.positions[-1], axis=1) > 0.8))
    report(10, frac > 0.36, f"fraction with |x| > 0.8 at t=300: {frac:.2f} (uniform 0.36)")
