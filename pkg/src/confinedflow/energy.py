"""Pairwise interaction energy, external potential and the induced forces.

The particle energy is

    E(X) = 1/(n(n-1)) * sum_{i>j} V(x_i - x_j) + 1/n * sum_i W(x_i)

and the force on particle i is ``-grad_i E``.  ``V`` is radial and repulsive
(``|x|^-p`` or a C2 regularisation of it below a cutoff); ``W`` is zero or
linear.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

FORCE_CHUNK = 512


class SingularEnergyError(ArithmeticError):
    """Two particles coincide under a singular interaction potential."""

    def __init__(self, i: int, j: int):
        self.pair = (int(i), int(j))
        super().__init__(f"particles {i} and {j} coincide: energy is infinite")


# -- interaction potentials ---------------------------------------------------

@dataclass(frozen=True)
class InversePower:
    """``V(x) = |x|^(-p)``, singular at the origin."""

    exponent: float = 1.0
    singular: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.exponent <= 0:
            raise ValueError("exponent must be positive")

    def radial(self, r):
        return np.power(r, -self.exponent)

    def radial_d1(self, r):
        p = self.exponent
        return -p * np.power(r, -p - 1)

    def radial_d2(self, r):
        p = self.exponent
        return p * (p + 1) * np.power(r, -p - 2)

    def value(self, x):
        return self.radial(np.linalg.norm(np.asarray(x, dtype=float), axis=-1))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return -self.exponent * np.power(r, -self.exponent - 2) * x

    def spec(self) -> dict:
        return {"kind": "inverse_power", "exponent": self.exponent, "regularized": False}


@dataclass(frozen=True)
class RegularizedPotential:
    """``base`` outside the cutoff, an even quartic ``a + b r^2 + c r^4`` inside.

    The quartic matches value, first and second radial derivative of ``base``
    at ``r = cutoff``, so the potential is C2 and finite at the origin.
    """

    base: InversePower
    cutoff: float
    coefficients: tuple[float, float, float] = field(init=False)
    singular: bool = field(default=False, init=False)

    def __post_init__(self):
        h = self.cutoff
        if not h > 0:
            raise ValueError("cutoff must be positive")
        A = np.array([[1.0, h * h, h ** 4],
                      [0.0, 2 * h, 4 * h ** 3],
                      [0.0, 2.0, 12 * h * h]])
        rhs = np.array([self.base.radial(h), self.base.radial_d1(h), self.base.radial_d2(h)])
        coeffs = tuple(float(c) for c in np.linalg.solve(A, rhs))
        object.__setattr__(self, "coefficients", coeffs)
        # floor condition: inner piece never drops below V(h)
        r = np.linspace(0.0, h, 2001)
        if np.any(self._inner(r) < self.base.radial(h) * (1 - 1e-12)):
            raise ValueError(
                f"quartic regularisation of {self.base} at cutoff {h} dips below V(h)")

    def _inner(self, r):
        a, b, c = self.coefficients
        r2 = r * r
        return a + b * r2 + c * r2 * r2

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        inside = r < self.cutoff
        safe = np.where(inside, self.cutoff, r)
        return np.where(inside, self._inner(r), self.base.radial(safe))

    def radial_d1(self, r):
        r = np.asarray(r, dtype=float)
        _, b, c = self.coefficients
        inside = r < self.cutoff
        safe = np.where(inside, self.cutoff, r)
        return np.where(inside, 2 * b * r + 4 * c * r ** 3, self.base.radial_d1(safe))

    def radial_d2(self, r):
        r = np.asarray(r, dtype=float)
        _, b, c = self.coefficients
        inside = r < self.cutoff
        safe = np.where(inside, self.cutoff, r)
        return np.where(inside, 2 * b + 12 * c * r * r, self.base.radial_d2(safe))

    def value(self, x):
        return self.radial(np.linalg.norm(np.asarray(x, dtype=float), axis=-1))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        _, b, c = self.coefficients
        inside = r < self.cutoff
        safe = np.where(inside, self.cutoff, r)
        outer = self.base.radial_d1(safe) / safe
        # d/dr(inner)/r = 2b + 4c r^2 is regular at the origin
        return np.where(inside, 2 * b + 4 * c * r * r, outer) * x

    def spec(self) -> dict:
        d = self.base.spec()
        d.update(regularized=True, cutoff=self.cutoff)
        return d


def regularize(V: InversePower, h: float) -> RegularizedPotential:
    return RegularizedPotential(base=V, cutoff=h)


# -- external potentials -----------------------------------------------------

@dataclass(frozen=True)
class ExternalPotential:
    """``W(x) = a x_1 + b x_2`` (kind ``linear``) or ``W = 0`` (kind ``none``)."""

    coefficients: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    @property
    def kind(self) -> str:
        return "none" if not any(self.coefficients) else "linear"

    def value(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.coefficients)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.coefficients), x.shape).copy()

    def spec(self) -> dict:
        if self.kind == "none":
            return {"kind": "none"}
        return {"kind": "linear", "coefficients": list(self.coefficients)}


# -- energy model --------------------------------------------------------------

@dataclass(frozen=True)
class EnergyModel:
    interaction: InversePower | RegularizedPotential = field(default_factory=InversePower)
    external: ExternalPotential = field(default_factory=ExternalPotential)

    def _pair_weight(self, n: int) -> float:
        return 1.0 / (n * (n - 1)) if n > 1 else 0.0

    def energy(self, X) -> float:
        X = np.asarray(X, dtype=float)
        n = len(X)
        if n == 0:
            return 0.0
        total = 0.0
        if n > 1:
            iu, ju = np.triu_indices(n, k=1)
            r = np.linalg.norm(X[iu] - X[ju], axis=1)
            if self.interaction.singular and not r.all():
                k = int(np.flatnonzero(r == 0)[0])
                raise SingularEnergyError(iu[k], ju[k])
            total = self._pair_weight(n) * float(np.sum(self.interaction.radial(r)))
        return total + float(np.sum(self.external.value(X))) / n

    def forces(self, X, t: float = 0.0) -> np.ndarray:
        """All forces ``-grad_i E`` as an ``(n, 2)`` array (``t`` is unused: autonomous)."""
        X = np.asarray(X, dtype=float)
        n = len(X)
        F = np.zeros_like(X)
        if n == 0:
            return F
        if n > 1:
            w = self._pair_weight(n)
            for start in range(0, n, FORCE_CHUNK):
                block = X[start:start + FORCE_CHUNK]
                diff = block[:, None, :] - X[None, :, :]
                local = np.arange(len(block))
                rows = local + start
                if self.interaction.singular:
                    r2 = np.einsum("ijk,ijk->ij", diff, diff)
                    r2[local, rows] = 1.0
                    if not r2.all():
                        i, j = np.argwhere(r2 == 0)[0]
                        raise SingularEnergyError(i + start, j)
                diff[local, rows] = 1.0  # placeholder, zeroed below
                g = self.interaction.gradient(diff)
                g[local, rows] = 0.0
                F[start:start + len(block)] = -w * g.sum(axis=1)
        F -= self.external.gradient(X) / n
        return F

    def force(self, i: int, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        n = len(X)
        f = np.zeros(2)
        if n > 1:
            diff = X[i] - np.delete(X, i, axis=0)
            if self.interaction.singular and not np.linalg.norm(diff, axis=1).all():
                j = int(np.flatnonzero(np.linalg.norm(diff, axis=1) == 0)[0])
                raise SingularEnergyError(i, j + (j >= i))
            f = -self._pair_weight(n) * self.interaction.gradient(diff).sum(axis=0)
        return f - self.external.gradient(X[i]) / n

    def external_nonnegative(self, X) -> bool:
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        return bool(np.all(self.external.value(X) >= 0)) if len(X) else True

    def spec(self) -> dict:
        return {"interaction": self.interaction.spec(), "external": self.external.spec()}


def energy(model: EnergyModel, X) -> float:
    return model.energy(X)


def force(model: EnergyModel, i: int, X) -> np.ndarray:
    return model.force(i, X)


def regularized_energy(model: EnergyModel, X) -> float:
    if not isinstance(model.interaction, RegularizedPotential):
        raise TypeError("regularized_energy needs a model with a RegularizedPotential")
    return model.energy(X)


def model_from_spec(spec: dict) -> EnergyModel:
    inter = spec.get("interaction", {"kind": "inverse_power", "exponent": 1.0})
    if inter.get("kind", "inverse_power") != "inverse_power":
        raise ValueError(f"unsupported interaction kind {inter['kind']!r}")
    V = InversePower(float(inter.get("exponent", 1.0)))
    if inter.get("regularized"):
        V = regularize(V, float(inter["cutoff"]))
    ext = spec.get("external", {"kind": "none"})
    if ext.get("kind", "none") == "none":
        W = ExternalPotential()
    elif ext["kind"] == "linear":
        W = ExternalPotential(tuple(ext["coefficients"]))
    else:
        raise ValueError(f"unsupported external kind {ext['kind']!r}")
    return EnergyModel(V, W)


# -- separation ------------------------------------------------------------------

def _closest_pair(X: np.ndarray) -> tuple[int, int, float]:
    n = len(X)
    best = (0, 1, np.inf)
    for start in range(0, n, FORCE_CHUNK):
        block = X[start:start + FORCE_CHUNK]
        d = np.linalg.norm(block[:, None, :] - X[None, :, :], axis=2)
        rows = np.arange(len(block))
        d[rows, rows + start] = np.inf
        k = int(np.argmin(d))
        i, j = divmod(k, n)
        if d[i, j] < best[2]:
            best = (i + start, j, float(d[i, j]))
    return best


def min_separation(X) -> float:
    X = np.asarray(X, dtype=float)
    if len(X) < 2:
        return np.inf
    return _closest_pair(X)[2]


def separation_threshold(V, n: int, E0: float) -> float:
    """Largest ``h`` with ``V(y) > n(n-1) E0`` for all ``|y| < h``.

    Closed form for ``|x|^-p``; bisection on the radial profile otherwise.
    """
    if not E0 > 0:
        raise ValueError("E0 must be positive")
    level = n * (n - 1) * E0
    if isinstance(V, InversePower):
        return level ** (-1.0 / V.exponent)
    if np.isinf(level):
        return 0.0
    # bracket: need V(lo) > level >= V(hi) with V decreasing on [lo, hi]
    hi = 1.0
    while V.radial(hi) > level:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("radial profile never drops below the energy level")
    r = np.linspace(0.0, hi, 4097)[1:]
    if np.any(np.diff(V.radial(r)) > 0):
        raise ValueError("radial profile is not monotone on the search interval")
    if V.radial(0.0) <= level:
        return 0.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if V.radial(mid) > level:
            lo = mid
        else:
            hi = mid
    return lo


def warn_if_signed_external(model: EnergyModel, X) -> bool:
    """Warn and return False when W is negative somewhere on X (separation check invalid)."""
    if model.external_nonnegative(X):
        return True
    warnings.warn("external potential takes negative values; "
                  "separation-bound diagnostics are disabled", stacklevel=2)
    return False
