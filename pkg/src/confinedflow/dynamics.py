"""Confined first-order particle dynamics.

Two time integrators are provided:

* ``projected_rk4``: a classical RK4 step on the unconstrained forces, then
  every particle that ended up outside the domain is moved to its closest
  boundary point.
* ``penalty_euler``: explicit Euler on ``F_i - k * d grad d(x_i)``, which lets
  particles penetrate the boundary by roughly ``|F|/k``.

The exact (time-continuous) velocity field is the one-sided projection of
the force: the outward normal component is removed only for particles on the
boundary whose force points outward.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import EnergyModel, SingularEnergyError, min_separation
from .geometry import (Domain, GeometryError, OutsideTubeError, _as_points, d_grad_d,
                       exterior_distance)

log = logging.getLogger(__name__)

CONTACT_TOL = 1e-6
SCHEMES = ("projected_rk4", "penalty_euler")


class StepError(RuntimeError):
    """A time step could not be completed; ``particle`` names the culprit if known."""

    def __init__(self, message: str, particle: int | None = None):
        self.particle = particle
        super().__init__(message if particle is None else f"{message} (particle {particle})")


class SimulationAborted(RuntimeError):
    """Raised by ``simulate`` on a step failure; ``trajectory`` holds the valid frames."""

    def __init__(self, trajectory: "Trajectory", cause: Exception):
        self.trajectory = trajectory
        super().__init__(f"simulation aborted at t={trajectory.times[-1]:.6g}: {cause}")


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "projected_rk4"
    dt: float = 0.5
    penalty_k: float | None = None
    contact_tolerance: float = CONTACT_TOL
    record_every: int = 1
    stability_factor: float = 0.5

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.scheme == "penalty_euler":
            if self.penalty_k is None or not self.penalty_k > 0:
                raise ValueError("penalty_euler needs a positive penalty_k")
            if self.dt * self.penalty_k > self.stability_factor:
                raise ValueError(
                    f"dt * penalty_k = {self.dt * self.penalty_k:.3g} exceeds the "
                    f"stability factor {self.stability_factor}")

    def spec(self) -> dict:
        d = {"scheme": self.scheme, "dt": self.dt, "record_every": self.record_every,
             "contact_tolerance": self.contact_tolerance}
        if self.penalty_k is not None:
            d["penalty_k"] = self.penalty_k
            d["stability_factor"] = self.stability_factor
        return d

    @classmethod
    def from_spec(cls, spec: dict) -> "IntegratorConfig":
        return cls(**{k: v for k, v in spec.items()
                      if k in ("scheme", "dt", "penalty_k", "contact_tolerance",
                               "record_every", "stability_factor")})


@dataclass(frozen=True)
class SystemState:
    time: float
    positions: np.ndarray
    boundary_flags: np.ndarray

    @classmethod
    def initial(cls, domain: Domain, X0, contact_tol: float = CONTACT_TOL, time: float = 0.0):
        X0 = np.array(X0, dtype=float).reshape(-1, 2)
        return cls(time, X0, contact_flags(domain, X0, contact_tol))


@dataclass
class Trajectory:
    """Recorded frames of one run.

    ``positions`` has shape ``(frames, n, 2)``; ``flags``, ``energy``,
    ``min_separation`` and ``max_force`` are per-frame.  ``max_force_norm`` is
    the running maximum of force norms seen at every step, not only at
    recorded frames.
    """

    times: np.ndarray
    positions: np.ndarray
    flags: np.ndarray
    energy: np.ndarray
    min_separation: np.ndarray
    max_force: np.ndarray
    integrator: IntegratorConfig
    max_force_norm: float = 0.0
    meta: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def n_frames(self) -> int:
        return len(self.times)

    @property
    def n_particles(self) -> int:
        return self.positions.shape[1]

    def state(self, m: int) -> SystemState:
        return SystemState(float(self.times[m]), self.positions[m], self.flags[m])


# -- boundary contact -----------------------------------------------------------

def contact_flags(domain: Domain, X: np.ndarray, tol: float = CONTACT_TOL) -> np.ndarray:
    """``|d_s(x_i)| <= tol`` per particle."""
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    flags = np.zeros(len(X), dtype=bool)
    if not len(X):
        return flags
    est = domain.estimate_distance(X)
    cand = np.flatnonzero(np.abs(est) <= max(1e-3, 10 * tol))
    if cand.size:
        q = domain.query(X[cand])
        flags[cand] = np.abs(q.signed_distance) <= tol
    return flags


def boundary_normals(domain: Domain, X: np.ndarray) -> np.ndarray:
    return domain.query(np.asarray(X, dtype=float).reshape(-1, 2)).normal


def one_sided_projection(domain: Domain, x, f, contact_tol: float = CONTACT_TOL):
    """Remove the outward normal part of ``f`` for boundary points pushed outward."""
    p, single = _as_points(x)
    fv = np.array(f, dtype=float).reshape(p.shape)
    on = contact_flags(domain, p, contact_tol)
    if on.any():
        nu = boundary_normals(domain, p[on])
        fn = np.einsum("ij,ij->i", fv[on], nu)
        push = fn > 0
        idx = np.flatnonzero(on)[push]
        fv[idx] -= fn[push, None] * nu[push]
    return fv[0] if single else fv


def projected_rhs(domain: Domain, model: EnergyModel, X, contact_tol: float = CONTACT_TOL,
                  t: float = 0.0) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return one_sided_projection(domain, X, model.forces(X, t), contact_tol)


def penalty_rhs(domain: Domain, model: EnergyModel, k: float, X, t: float = 0.0) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return model.forces(X, t) - k * d_grad_d(domain, X)


# -- steppers ---------------------------------------------------------------------

def _project_outside(domain: Domain, Y: np.ndarray) -> np.ndarray:
    out = np.flatnonzero(domain.level_set(Y) > 0)
    if out.size:
        q = domain.query(Y[out])
        if not q.converged.all():
            raise StepError("closest-point projection failed", int(out[~q.converged][0]))
        Y[out] = q.foot_point
    return Y


def _rk4(model: EnergyModel, X: np.ndarray, t: float, dt: float):
    k1 = model.forces(X, t)
    k2 = model.forces(X + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = model.forces(X + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = model.forces(X + dt * k3, t + dt)
    return X + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), k1


def step_projected_rk4(domain: Domain, model: EnergyModel, state: SystemState, dt: float,
                       contact_tol: float = CONTACT_TOL) -> SystemState:
    """One RK4 step on raw forces, then closest-point projection of escaped particles."""
    Y, _ = _rk4(model, state.positions, state.time, dt)
    Y = _project_outside(domain, Y)
    return SystemState(state.time + dt, Y, contact_flags(domain, Y, contact_tol))


def step_penalty_euler(domain: Domain, model: EnergyModel, state: SystemState, dt: float,
                       k: float, contact_tol: float = CONTACT_TOL) -> SystemState:
    """One explicit Euler step on the penalty velocity; no projection.

    Raises ``StepError`` if a particle starts or ends the step outside the
    distance tube, so the returned state is always a valid one.
    """
    try:
        v = penalty_rhs(domain, model, k, state.positions, state.time)
    except OutsideTubeError as err:
        raise StepError("particle left the distance tube", int(err.indices[0])) from err
    Y = state.positions + dt * v
    depth = exterior_distance(domain, Y)
    if depth.max(initial=0.0) > domain.tube_width:
        raise StepError("particle left the distance tube", int(np.argmax(depth)))
    return SystemState(state.time + dt, Y, contact_flags(domain, Y, contact_tol))


# -- time loop ---------------------------------------------------------------------

def _safe_energy(model: EnergyModel, X: np.ndarray) -> float:
    try:
        return model.energy(X)
    except SingularEnergyError:
        return np.inf


def simulate(domain: Domain, model: EnergyModel, X0, config: IntegratorConfig,
             T: float) -> Trajectory:
    """Integrate from ``X0`` up to time ``T`` and record every ``record_every`` steps.

    The final state is always recorded.  A failing step raises
    ``SimulationAborted`` carrying the frames recorded so far plus the last
    valid state.
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    dt = config.dt
    tol = config.contact_tolerance
    state = SystemState.initial(domain, X0, tol)
    n_steps = int(np.ceil(T / dt - 1e-9)) if T > 0 else 0

    times, pos, flags, energy, minsep, maxf = [], [], [], [], [], []
    max_force_norm = 0.0
    warned = False

    def record(s: SystemState, F: np.ndarray):
        times.append(s.time)
        pos.append(s.positions.copy())
        flags.append(s.boundary_flags.copy())
        energy.append(_safe_energy(model, s.positions))
        minsep.append(min_separation(s.positions))
        maxf.append(float(np.linalg.norm(F, axis=1).max()) if len(F) else 0.0)

    def build(error=None) -> Trajectory:
        return Trajectory(np.array(times), np.array(pos).reshape(len(times), -1, 2),
                          np.array(flags).reshape(len(times), -1), np.array(energy),
                          np.array(minsep), np.array(maxf), config, max_force_norm,
                          error=error)

    F = model.forces(state.positions, state.time)
    for step in range(1, n_steps + 1):
        if F.size:
            max_force_norm = max(max_force_norm, float(np.linalg.norm(F, axis=1).max()))
        if (step - 1) % config.record_every == 0:
            record(state, F)
        h = min(dt, T - (step - 1) * dt)
        try:
            if config.scheme == "projected_rk4":
                state = step_projected_rk4(domain, model, state, h, tol)
            else:
                k = config.penalty_k
                if not warned and max_force_norm >= k * domain.tube_width:
                    log.warning("penalty_k=%g does not exceed max|F|/tube_width=%g",
                                k, max_force_norm / domain.tube_width)
                    warned = True
                state = step_penalty_euler(domain, model, state, h, k, tol)
            # times from the step counter, not by accumulation
            state = replace(state, time=step * dt if step < n_steps else T)
            F = model.forces(state.positions, state.time)
        except (StepError, GeometryError, SingularEnergyError) as err:
            if not times or times[-1] != state.time:
                record(state, F)
            raise SimulationAborted(build(error=str(err)), err) from err
    if F.size:
        max_force_norm = max(max_force_norm, float(np.linalg.norm(F, axis=1).max()))
    record(state, F)
    return build()


def mild_solution_residual(traj: Trajectory, domain: Domain, model: EnergyModel) -> float:
    """Max over frames/particles of ``|x(t) - x(0) - int_0^t H ds|`` (trapezoidal rule)."""
    if traj.n_frames < 2:
        return 0.0
    tol = traj.integrator.contact_tolerance
    H = np.array([projected_rhs(domain, model, X, tol, t)
                  for t, X in zip(traj.times, traj.positions)])
    dt = np.diff(traj.times)[:, None, None]
    integral = np.concatenate([np.zeros_like(H[:1]),
                               np.cumsum(0.5 * dt * (H[1:] + H[:-1]), axis=0)])
    res = traj.positions - traj.positions[:1] - integral
    return float(np.linalg.norm(res, axis=2).max(initial=0.0))
