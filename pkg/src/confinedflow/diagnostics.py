"""Numerical checks of the qualitative guarantees of confined gradient flows.

Every check is a pure function of a recorded trajectory (plus the model and
domain that produced it) and returns a ``DiagnosticReport``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (IntegratorConfig, Trajectory, boundary_normals,
                       simulate)
from .energy import EnergyModel, SingularEnergyError, separation_threshold
from .geometry import Domain, exterior_distance

ENERGY_TOL = 1e-8
CONFINEMENT_TOL = 1e-9
DETACH_REL_TOL = 0.1
BOUNDARY_SIGN_TOL = 1e-6
SEPARATION_RTOL = 1e-12  # rounding only: the bound is attained exactly for n = 2


@dataclass
class DiagnosticReport:
    name: str
    passed: bool
    measured: float
    threshold: float
    offending: list = field(default_factory=list)
    skipped: bool = False
    note: str = ""
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        text = f"[{status}] {self.name}: measured={self.measured:.6g} threshold={self.threshold:.6g}"
        if self.offending:
            text += f" offending={self.offending[:5]}"
        if self.note:
            text += f" ({self.note})"
        return text

    def as_flat(self) -> dict:
        d = {"pass": self.passed, "skipped": self.skipped, "measured": self.measured,
             "threshold": self.threshold, "n_offending": len(self.offending)}
        d.update(self.extra)
        return {f"{self.name}.{k}": v for k, v in d.items()}


@dataclass(frozen=True)
class ContactEvent:
    particle: int
    frame: int
    kind: str  # "attach" | "detach"
    normal_force: float
    force_norm: float


def _skip(name: str, why: str) -> DiagnosticReport:
    return DiagnosticReport(name, True, float("nan"), float("nan"), skipped=True, note=why)


def check_energy_decay(traj: Trajectory, model: EnergyModel | None = None,
                       tolerance: float = ENERGY_TOL) -> DiagnosticReport:
    """``E(m+1) <= E(m) + tol * max(1, |E(m)|)`` for all consecutive frames."""
    E = np.asarray(traj.energy, dtype=float)
    if len(E) < 2:
        return DiagnosticReport("energy_decay", True, 0.0, tolerance)
    with np.errstate(invalid="ignore"):
        rel = np.diff(E) / np.maximum(1.0, np.abs(E[:-1]))
    rel = np.where(np.isfinite(rel), rel, np.inf)
    bad = np.flatnonzero(rel > tolerance)
    measured = float(max(rel.max(), 0.0))
    return DiagnosticReport("energy_decay", bad.size == 0, measured, tolerance,
                            offending=[int(m) + 1 for m in bad],
                            extra={"n_increase_events": int(bad.size)})


def check_separation(traj: Trajectory, model: EnergyModel) -> DiagnosticReport:
    """Minimal pairwise distance is at least the energy-level separation threshold."""
    name = "separation_bound"
    if not model.external_nonnegative(traj.positions.reshape(-1, 2)):
        return _skip(name, "external potential negative on trajectory")
    n = traj.n_particles
    if n < 2:
        return DiagnosticReport(name, True, np.inf, 1.0)
    worst, offending = np.inf, []
    for m, X in enumerate(traj.positions):
        diff = X[:, None, :] - X[None, :, :]
        r = np.linalg.norm(diff, axis=2)[np.triu_indices(n, k=1)]
        try:
            E = model.energy(X)
        except SingularEnergyError:
            worst = 0.0
            offending.append(m)
            continue
        ratio = r.min() / separation_threshold(model.interaction, n, E)
        worst = min(worst, ratio)
        if not ratio >= 1.0 - SEPARATION_RTOL:
            offending.append(m)
    return DiagnosticReport(name, not offending, float(worst), 1.0, offending=offending,
                            note="measured = min over frames of min_sep / threshold")


def check_confinement(traj: Trajectory, domain: Domain,
                      tolerance: float = CONFINEMENT_TOL) -> DiagnosticReport:
    worst, offending = 0.0, []
    for m, X in enumerate(traj.positions):
        d = exterior_distance(domain, X)
        if d.size and d.max() > tolerance:
            offending.append((m, int(d.argmax())))
        worst = max(worst, float(d.max()) if d.size else 0.0)
    return DiagnosticReport("confinement", not offending, worst, tolerance, offending=offending)


def _normal_forces(domain: Domain, model: EnergyModel, X: np.ndarray, idx: np.ndarray):
    F = model.forces(X)[idx]
    nu = boundary_normals(domain, X[idx])
    return np.einsum("ij,ij->i", F, nu), np.linalg.norm(F, axis=1)


def detect_contact_events(traj: Trajectory, domain: Domain,
                          model: EnergyModel) -> list[ContactEvent]:
    """One event per boundary-flag transition, with ``F.nu`` at the on-boundary frame."""
    events = []
    flags = traj.flags
    for m in range(1, traj.n_frames):
        attach = np.flatnonzero(~flags[m - 1] & flags[m])
        detach = np.flatnonzero(flags[m - 1] & ~flags[m])
        for kind, idx, src in (("attach", attach, m), ("detach", detach, m - 1)):
            if idx.size:
                fn, fnorm = _normal_forces(domain, model, traj.positions[src], idx)
                events += [ContactEvent(int(i), m, kind, float(a), float(b))
                           for i, a, b in zip(idx, fn, fnorm)]
    events.sort(key=lambda e: (e.frame, e.particle))
    return events


def check_detachment_tangency(events: list[ContactEvent],
                              rel_tol: float = DETACH_REL_TOL) -> DiagnosticReport:
    """At every detach event ``|F.nu| <= rel_tol * |F|``."""
    det = [e for e in events if e.kind == "detach"]
    ratios = [abs(e.normal_force) / e.force_norm if e.force_norm > 0 else 0.0 for e in det]
    bad = [(e.frame, e.particle) for e, r in zip(det, ratios) if r > rel_tol]
    return DiagnosticReport("detachment_tangency", not bad, float(max(ratios, default=0.0)),
                            rel_tol, offending=bad, extra={"n_detach_events": len(det)},
                            note="measured = max |F.nu| / |F| over detach events")


def check_boundary_sign(traj: Trajectory, domain: Domain, model: EnergyModel,
                        tolerance: float = BOUNDARY_SIGN_TOL) -> DiagnosticReport:
    """``F.nu >= -tol`` wherever a particle is on the boundary at frames m and m+1."""
    worst, bad = np.inf, []
    for m in range(traj.n_frames - 1):
        idx = np.flatnonzero(traj.flags[m] & traj.flags[m + 1])
        if not idx.size:
            continue
        fn, _ = _normal_forces(domain, model, traj.positions[m], idx)
        worst = min(worst, float(fn.min()))
        bad += [(m, int(i)) for i in idx[fn < -tolerance]]
    return DiagnosticReport("boundary_sign", not bad, worst, -tolerance, offending=bad,
                            note="measured = min F.nu over persistent boundary frames")


def velocity_bound_check(traj: Trajectory, rel_tol: float = 0.05,
                         abs_tol: float = 1e-12) -> DiagnosticReport:
    """Finite-difference speeds stay below ``2 max|F|`` (penalty mode only)."""
    if traj.integrator.scheme != "penalty_euler":
        return _skip("velocity_bound", "penalty mode only")
    if traj.n_frames < 2:
        return DiagnosticReport("velocity_bound", True, 0.0, abs_tol)
    v = np.linalg.norm(np.diff(traj.positions, axis=0), axis=2) / np.diff(traj.times)[:, None]
    limit = 2 * traj.max_force_norm * (1 + rel_tol) + abs_tol
    bad = np.argwhere(v > limit)
    return DiagnosticReport("velocity_bound", bad.size == 0, float(v.max()), limit,
                            offending=[tuple(int(a) for a in b) for b in bad],
                            extra={"max_force_norm": traj.max_force_norm})


def penetration_bound_check(traj: Trajectory, domain: Domain,
                            rel_tol: float = 0.1) -> DiagnosticReport:
    """Penetration depth stays below ``max|F| / k`` (penalty mode only)."""
    if traj.integrator.scheme != "penalty_euler":
        return _skip("penetration_bound", "penalty mode only")
    depth = np.array([exterior_distance(domain, X) for X in traj.positions])
    limit = traj.max_force_norm / traj.integrator.penalty_k * (1 + rel_tol)
    bad = np.argwhere(depth > limit)
    return DiagnosticReport("penetration_bound", bad.size == 0, float(depth.max(initial=0.0)),
                            limit, offending=[tuple(int(a) for a in b) for b in bad],
                            extra={"max_force_norm": traj.max_force_norm})


# -- studies requiring fresh runs ------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    k: float
    dt: float
    sup_distance: float


def penalty_convergence_study(domain: Domain, model: EnergyModel, X0, ks, T: float,
                              dt: float | None = None, dt_factor: float = 0.1,
                              record_every: int = 1) -> list[ConvergenceRow]:
    """Sup-norm gap between penalty trajectories and a projected-RK4 reference.

    With ``dt=None`` each penalty run uses ``dt_factor / k``; the reference is
    run on the same time grid so frames align.
    """
    rows = []
    for k in ks:
        h = dt if dt is not None else dt_factor / k
        pen = simulate(domain, model, X0,
                       IntegratorConfig("penalty_euler", h, penalty_k=k, record_every=record_every), T)
        ref = simulate(domain, model, X0,
                       IntegratorConfig("projected_rk4", h, record_every=record_every), T)
        gap = np.linalg.norm(pen.positions - ref.positions, axis=2).max()
        rows.append(ConvergenceRow(float(k), h, float(gap)))
    return rows


def fitted_order(rows: list[ConvergenceRow]) -> float:
    """Least-squares slope of ``-log(dist)`` against ``log(k)``."""
    k = np.log([r.k for r in rows])
    d = np.log([r.sup_distance for r in rows])
    return float(-np.polyfit(k, d, 1)[0])


def perturb(domain: Domain, X0, delta: float, seed: int = 0) -> np.ndarray:
    """Move every particle by ``delta`` in a random direction (max-norm ``delta``)."""
    X0 = np.asarray(X0, dtype=float)
    theta = np.random.default_rng(seed).uniform(0, 2 * np.pi, len(X0))
    Y = X0 + delta * np.column_stack([np.cos(theta), np.sin(theta)])
    out = np.flatnonzero(domain.level_set(Y) > 0)
    if out.size:
        Y[out] = X0[out]
    return Y


def stability_check(domain: Domain, model: EnergyModel, X0, delta: float,
                    config: IntegratorConfig, T: float, seed: int = 0,
                    early_fraction: float = 0.1, safety: float = 2.0) -> DiagnosticReport:
    """Twin runs from ``X0`` and a ``delta`` perturbation stay within ``delta exp(C t)``.

    ``C`` is ``safety`` times the largest growth rate ``log(dist/delta)/t``
    seen over the first ``early_fraction`` of frames (clamped at 0).  A
    Gronwall constant bounds the growth rather than estimating it, hence the
    inflation.
    """
    a = simulate(domain, model, X0, config, T)
    b = simulate(domain, model, perturb(domain, X0, delta, seed), config, T)
    dist = np.linalg.norm(a.positions - b.positions, axis=2).max(axis=1)
    t = a.times
    if delta == 0:
        ok = bool(np.all(dist == 0))
        return DiagnosticReport("stability", ok, float(dist.max()), 0.0,
                                extra={"rate": 0.0, "max_distance": float(dist.max())})
    n_early = max(2, int(np.ceil(early_fraction * len(t))))
    early = slice(1, n_early)
    with np.errstate(divide="ignore"):
        rates = np.log(dist[early] / delta) / t[early]
    rate = safety * float(max(0.0, rates.max(initial=0.0)))
    bound = delta * np.exp(rate * t) * (1 + 1e-6)
    ratio = dist / bound
    bad = np.flatnonzero(ratio > 1.0)
    return DiagnosticReport("stability", bad.size == 0, float(ratio.max()), 1.0,
                            offending=[int(m) for m in bad],
                            extra={"rate": rate, "max_distance": float(dist.max())},
                            note="measured = max dist / (delta exp(C t))")


# -- informational -------------------------------------------------------------------

def ordering_statistic(X0: np.ndarray, X: np.ndarray, red: np.ndarray, center) -> float:
    """Fraction of (red, blue) pairs with the red particle closer to ``center``.

    Only for inspection of mixing; 1.0 means the colour layers kept their
    radial order.
    """
    red = np.asarray(red, dtype=bool)
    if red.all() or not red.any():
        return float("nan")
    r = np.linalg.norm(np.asarray(X) - np.asarray(center), axis=1)
    return float(np.mean(r[red][:, None] < r[~red][None, :]))


def run_suite(traj: Trajectory, domain: Domain, model: EnergyModel) -> list[DiagnosticReport]:
    """All trajectory-level checks applicable to the run's integration scheme."""
    reports = [check_energy_decay(traj, model)]
    if traj.integrator.scheme == "projected_rk4":
        reports.append(check_confinement(traj, domain))
        reports.append(check_separation(traj, model))
        events = detect_contact_events(traj, domain, model)
        reports.append(check_detachment_tangency(events))
        reports.append(check_boundary_sign(traj, domain, model))
    else:
        reports.append(check_separation(traj, model))
        reports.append(penetration_bound_check(traj, domain))
        reports.append(velocity_bound_check(traj))
    return reports


def all_passed(reports: list[DiagnosticReport]) -> bool:
    return all(r.passed for r in reports if not r.skipped)


__all__ = [
    "ContactEvent", "ConvergenceRow", "DiagnosticReport",
    "all_passed", "check_boundary_sign", "check_confinement", "check_detachment_tangency",
    "check_energy_decay", "check_separation", "detect_contact_events", "fitted_order",
    "ordering_statistic", "penalty_convergence_study", "penetration_bound_check", "perturb",
    "run_suite", "stability_check", "velocity_bound_check",
]
