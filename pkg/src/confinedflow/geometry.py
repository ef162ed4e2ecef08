"""Implicit planar domains: signed distance, outward normals, closest points.

A domain is the sublevel set ``{phi < 0}`` of a smooth level-set function.
Disks, strips and their complements have exact distance functions.  Smooth
unions and intersections blend two level sets with a C2 polynomial
smooth-min, and their distance queries fall back on a Newton closest-point
projection onto the zero set.

All queries accept either a single point of shape ``(2,)`` or a batch of
shape ``(N, 2)`` and are vectorised over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROJECTION_TOL = 1e-10
MAX_NEWTON_ITER = 50
DEFAULT_BLEND_RADIUS = 0.05
TUBE_FRACTION = 0.1


class GeometryError(ValueError):
    """Raised for invalid domain construction or untrusted distance queries."""


class OutsideTubeError(GeometryError):
    """A query point lies farther from the domain than the trusted tube."""

    def __init__(self, indices, distances, tube_width):
        self.indices = np.atleast_1d(indices)
        self.distances = np.atleast_1d(distances)
        self.tube_width = tube_width
        super().__init__(
            f"{self.indices.size} point(s) outside the distance tube "
            f"(max distance {self.distances.max():.3g} > {tube_width:.3g}); "
            f"first index {int(self.indices[0])}"
        )


@dataclass(frozen=True)
class BoundaryQuery:
    """Result of a closest-point query (arrays for batched input)."""

    signed_distance: np.ndarray
    normal: np.ndarray
    foot_point: np.ndarray
    converged: np.ndarray


def _as_points(x) -> tuple[np.ndarray, bool]:
    p = np.asarray(x, dtype=float)
    if p.ndim == 1:
        if p.shape != (2,):
            raise ValueError(f"expected a 2D point, got shape {p.shape}")
        return p[None, :], True
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError(f"expected points of shape (N, 2), got {p.shape}")
    return p, False


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(norm > 0, norm, 1.0)


class Domain:
    """Base class for an implicit domain ``{phi < 0}`` in the plane.

    Subclasses provide ``level_set``, ``level_set_grad`` and optionally
    ``level_set_hess`` (batched, ``(N,2)`` in).  ``feature_size`` is the
    smallest length scale of the shape; it bounds admissible blend radii and
    sets the default tube width.
    """

    feature_size: float = np.inf
    blend_radius: float = 0.0
    tube_width: float = np.inf
    exact: bool = False

    def level_set(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def level_set_grad(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def level_set_hess(self, p: np.ndarray, step: float = 1e-6) -> np.ndarray:
        hess = np.empty(p.shape[:1] + (2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = step
            hess[:, :, k] = (self.level_set_grad(p + e) - self.level_set_grad(p - e)) / (2 * step)
        return 0.5 * (hess + hess.transpose(0, 2, 1))

    def spec(self) -> dict:
        raise NotImplementedError

    def bounding_box(self) -> tuple[float, float, float, float] | None:
        """Axis-aligned box containing the domain, or None when unbounded."""
        return None

    # -- queries ---------------------------------------------------------
    def _exact_query(self, p: np.ndarray) -> BoundaryQuery:
        raise NotImplementedError

    def query(self, p: np.ndarray) -> BoundaryQuery:
        """Closest boundary point for a batch ``(N, 2)``."""
        if self.exact:
            return self._exact_query(p)
        return newton_projection(self, p)

    def estimate_distance(self, p: np.ndarray) -> np.ndarray:
        """First-order distance estimate ``phi / |grad phi|`` (cheap, approximate)."""
        if self.exact:
            return self._exact_query(p).signed_distance
        g = np.linalg.norm(self.level_set_grad(p), axis=1)
        return self.level_set(p) / np.maximum(g, 1e-300)

    def contains(self, x) -> np.ndarray | bool:
        p, single = _as_points(x)
        inside = self.level_set(p) < 0
        return bool(inside[0]) if single else inside


def newton_projection(domain: Domain, x: np.ndarray, tol: float = PROJECTION_TOL,
                      max_iter: int = MAX_NEWTON_ITER) -> BoundaryQuery:
    """Closest point on ``{phi = 0}`` by Newton's method on the optimality system.

    Solves ``phi(p) = 0`` and ``(x - p) x grad phi(p) = 0`` (2D cross product),
    seeded at ``x - phi(x) grad phi(x) / |grad phi(x)|^2``.
    """
    x = np.asarray(x, dtype=float)
    g0 = domain.level_set_grad(x)
    gg = np.maximum(np.einsum("ij,ij->i", g0, g0), 1e-300)
    p = x - (domain.level_set(x) / gg)[:, None] * g0
    converged = np.zeros(len(x), dtype=bool)
    active = np.ones(len(x), dtype=bool)
    step_cap = max(domain.feature_size, 1e-3) * 0.5

    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        pa, xa = p[idx], x[idx]
        phi = domain.level_set(pa)
        g = domain.level_set_grad(pa)
        H = domain.level_set_hess(pa)
        r = xa - pa
        res = np.stack([phi, g[:, 0] * r[:, 1] - g[:, 1] * r[:, 0]], axis=1)
        J = np.empty((len(idx), 2, 2))
        J[:, 0, :] = g
        J[:, 1, 0] = H[:, 0, 0] * r[:, 1] - H[:, 1, 0] * r[:, 0] + g[:, 1]
        J[:, 1, 1] = H[:, 0, 1] * r[:, 1] - H[:, 1, 1] * r[:, 0] - g[:, 0]
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        ok = np.abs(det) > 1e-300
        step = np.zeros_like(pa)
        safe_det = np.where(ok, det, 1.0)
        step[:, 0] = -(J[:, 1, 1] * res[:, 0] - J[:, 0, 1] * res[:, 1]) / safe_det
        step[:, 1] = -(-J[:, 1, 0] * res[:, 0] + J[:, 0, 0] * res[:, 1]) / safe_det
        length = np.linalg.norm(step, axis=1)
        scale = np.minimum(1.0, step_cap / np.maximum(length, 1e-300))
        step *= scale[:, None]
        p[idx] = pa + step
        done = ok & (length * scale <= tol)
        converged[idx[done]] = True
        active[idx[done | ~ok]] = False

    g = domain.level_set_grad(p)
    normal = _unit(g)
    # the sign comes from set membership; a foot point whose normal faces the
    # wrong way is a non-minimal stationary point and fails the identity below
    d = np.sign(domain.level_set(x)) * np.linalg.norm(x - p, axis=1)
    gnorm = np.linalg.norm(g, axis=1)
    on_set = np.abs(domain.level_set(p)) <= 10 * tol * np.maximum(gnorm, 1.0)
    perp = x - p - d[:, None] * normal
    consistent = np.linalg.norm(perp, axis=1) <= 1e-8 * np.maximum(1.0, np.abs(d))
    converged &= on_set & consistent & (gnorm > 0)
    return BoundaryQuery(d, normal, p, converged)


# -- primitive shapes ------------------------------------------------------

@dataclass(frozen=True)
class Disk(Domain):
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    tube_width: float = field(default=None)  # type: ignore[assignment]
    exact: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError("disk radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.tube_width is None:
            object.__setattr__(self, "tube_width", TUBE_FRACTION * self.radius)

    @property
    def feature_size(self) -> float:
        return self.radius

    def level_set(self, p):
        return np.linalg.norm(p - np.asarray(self.center), axis=1) - self.radius

    def level_set_grad(self, p):
        return _unit(p - np.asarray(self.center))

    def level_set_hess(self, p, step=1e-6):
        r = p - np.asarray(self.center)
        rn = np.maximum(np.linalg.norm(r, axis=1), 1e-300)
        u = r / rn[:, None]
        return (np.eye(2)[None] - u[:, :, None] * u[:, None, :]) / rn[:, None, None]

    def _exact_query(self, p):
        c = np.asarray(self.center)
        r = p - c
        rn = np.linalg.norm(r, axis=1)
        normal = np.where(rn[:, None] > 0, r / np.where(rn > 0, rn, 1.0)[:, None],
                          np.array([1.0, 0.0]))
        foot = c + self.radius * normal
        return BoundaryQuery(rn - self.radius, normal, foot, np.ones(len(p), dtype=bool))

    def bounding_box(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cx + r, cy - r, cy + r)

    def spec(self):
        return {"shape": "disk", "center": list(self.center), "radius": self.radius,
                "tube_width": self.tube_width}


@dataclass(frozen=True)
class Strip(Domain):
    """Horizontal channel ``y_min < y < y_max``, unbounded in x."""

    y_min: float = 0.0
    y_max: float = 1.0
    tube_width: float = field(default=None)  # type: ignore[assignment]
    exact: bool = field(default=True, init=False)

    def __post_init__(self):
        if not self.y_max > self.y_min:
            raise GeometryError("strip needs y_max > y_min")
        if self.tube_width is None:
            object.__setattr__(self, "tube_width", TUBE_FRACTION * self.feature_size)

    @property
    def feature_size(self) -> float:
        return 0.5 * (self.y_max - self.y_min)

    def level_set(self, p):
        return np.maximum(self.y_min - p[:, 1], p[:, 1] - self.y_max)

    def level_set_grad(self, p):
        mid = 0.5 * (self.y_min + self.y_max)
        g = np.zeros_like(p)
        g[:, 1] = np.where(p[:, 1] >= mid, 1.0, -1.0)
        return g

    def level_set_hess(self, p, step=1e-6):
        return np.zeros((len(p), 2, 2))

    def _exact_query(self, p):
        mid = 0.5 * (self.y_min + self.y_max)
        upper = p[:, 1] >= mid
        normal = np.zeros_like(p)
        normal[:, 1] = np.where(upper, 1.0, -1.0)
        wall = np.where(upper, self.y_max, self.y_min)
        foot = np.column_stack([p[:, 0], wall])
        d = np.where(upper, p[:, 1] - self.y_max, self.y_min - p[:, 1])
        return BoundaryQuery(d, normal, foot, np.ones(len(p), dtype=bool))

    def spec(self):
        return {"shape": "strip", "y_min": self.y_min, "y_max": self.y_max,
                "tube_width": self.tube_width}


@dataclass(frozen=True)
class Complement(Domain):
    """Open complement of the closure of ``base`` (shares its boundary)."""

    base: Domain = None  # type: ignore[assignment]
    tube_width: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.tube_width is None:
            object.__setattr__(self, "tube_width", self.base.tube_width)

    @property
    def exact(self) -> bool:  # type: ignore[override]
        return self.base.exact

    @property
    def feature_size(self) -> float:
        return self.base.feature_size

    def level_set(self, p):
        return -self.base.level_set(p)

    def level_set_grad(self, p):
        return -self.base.level_set_grad(p)

    def level_set_hess(self, p, step=1e-6):
        return -self.base.level_set_hess(p, step)

    def _exact_query(self, p):
        q = self.base._exact_query(p)
        return BoundaryQuery(-q.signed_distance, -q.normal, q.foot_point, q.converged)

    def spec(self):
        return {"shape": "complement", "base": self.base.spec(), "tube_width": self.tube_width}


def _blend_profile(s: np.ndarray, k: float):
    """Smooth |s|/2 on |s| < k: returns f, f', f'' with f C2 at s = 0 and |s| = k."""
    a = np.abs(s)
    inside = a < k
    w = np.where(inside, k - a, 0.0)
    f = 0.5 * a + w ** 3 / (6 * k * k)
    f1 = np.sign(s) * (0.5 - w ** 2 / (2 * k * k))
    f2 = w / (k * k)
    return f, f1, f2


@dataclass(frozen=True)
class SmoothUnion(Domain):
    """``{smin(phi_a, phi_b) < 0}`` with a cubic C2 smooth-min of width ``blend_radius``."""

    a: Domain = None  # type: ignore[assignment]
    b: Domain = None  # type: ignore[assignment]
    blend_radius: float = DEFAULT_BLEND_RADIUS
    tube_width: float = field(default=None)  # type: ignore[assignment]
    exact: bool = field(default=False, init=False)
    _sign: float = field(default=1.0, init=False, repr=False)

    def __post_init__(self):
        if not self.blend_radius > 0:
            raise GeometryError("blend_radius must be positive")
        if self.blend_radius >= min(self.a.feature_size, self.b.feature_size):
            raise GeometryError(
                f"blend_radius {self.blend_radius} is not smaller than the component "
                f"feature size {min(self.a.feature_size, self.b.feature_size)}"
            )
        if self.tube_width is None:
            object.__setattr__(self, "tube_width", TUBE_FRACTION * self.feature_size)

    @property
    def feature_size(self) -> float:
        return min(self.a.feature_size, self.b.feature_size)

    def _parts(self, p):
        s = self._sign
        return s * self.a.level_set(p), s * self.b.level_set(p)

    def level_set(self, p):
        fa, fb = self._parts(p)
        f, _, _ = _blend_profile(fa - fb, self.blend_radius)
        return self._sign * (0.5 * (fa + fb) - f)

    def level_set_grad(self, p):
        fa, fb = self._parts(p)
        ga, gb = self._sign * self.a.level_set_grad(p), self._sign * self.b.level_set_grad(p)
        _, f1, _ = _blend_profile(fa - fb, self.blend_radius)
        return self._sign * (0.5 * (ga + gb) - f1[:, None] * (ga - gb))

    def level_set_hess(self, p, step=1e-6):
        s = self._sign
        fa, fb = self._parts(p)
        ga, gb = s * self.a.level_set_grad(p), s * self.b.level_set_grad(p)
        ha, hb = s * self.a.level_set_hess(p, step), s * self.b.level_set_hess(p, step)
        _, f1, f2 = _blend_profile(fa - fb, self.blend_radius)
        dg = ga - gb
        h = 0.5 * (ha + hb) - f2[:, None, None] * dg[:, :, None] * dg[:, None, :] \
            - f1[:, None, None] * (ha - hb)
        return s * h

    def in_blend_zone(self, p) -> np.ndarray:
        fa, fb = self._parts(p)
        return np.abs(fa - fb) < self.blend_radius

    def bounding_box(self):
        ba, bb = self.a.bounding_box(), self.b.bounding_box()
        if self._sign > 0:
            if ba is None or bb is None:
                return None
            return (min(ba[0], bb[0]) - self.blend_radius, max(ba[1], bb[1]) + self.blend_radius,
                    min(ba[2], bb[2]) - self.blend_radius, max(ba[3], bb[3]) + self.blend_radius)
        return ba if bb is None else bb if ba is None else (
            max(ba[0], bb[0]), min(ba[1], bb[1]), max(ba[2], bb[2]), min(ba[3], bb[3]))

    def spec(self):
        return {"shape": "union", "a": self.a.spec(), "b": self.b.spec(),
                "blend_radius": self.blend_radius, "tube_width": self.tube_width}


@dataclass(frozen=True)
class SmoothIntersection(SmoothUnion):
    """``{smax(phi_a, phi_b) < 0}``; smax(a, b) = -smin(-a, -b)."""

    _sign: float = field(default=-1.0, init=False, repr=False)

    def spec(self):
        d = super().spec()
        d["shape"] = "intersection"
        return d


# -- constructors ------------------------------------------------------------

def make_disk(center=(0.0, 0.0), radius: float = 1.0, tube_width: float | None = None) -> Disk:
    return Disk(center=tuple(center), radius=radius, tube_width=tube_width)


def make_strip(y_min: float, y_max: float, tube_width: float | None = None) -> Strip:
    return Strip(y_min=y_min, y_max=y_max, tube_width=tube_width)


def smooth_union(a: Domain, b: Domain, blend_radius: float = DEFAULT_BLEND_RADIUS,
                 tube_width: float | None = None) -> SmoothUnion:
    return SmoothUnion(a=a, b=b, blend_radius=blend_radius, tube_width=tube_width)


def smooth_intersection(a: Domain, b: Domain, blend_radius: float = DEFAULT_BLEND_RADIUS,
                        tube_width: float | None = None) -> SmoothIntersection:
    return SmoothIntersection(a=a, b=b, blend_radius=blend_radius, tube_width=tube_width)


def complement(a: Domain, tube_width: float | None = None) -> Complement:
    return Complement(base=a, tube_width=tube_width)


def smooth_difference(a: Domain, b: Domain, blend_radius: float = DEFAULT_BLEND_RADIUS,
                      tube_width: float | None = None) -> SmoothIntersection:
    """``a`` minus ``b``, blended."""
    return smooth_intersection(a, complement(b), blend_radius, tube_width)


def domain_from_spec(spec: dict) -> Domain:
    """Build a domain from its config dictionary (see ``Domain.spec``)."""
    shape = spec["shape"]
    tube = spec.get("tube_width")
    if shape == "disk":
        return make_disk(spec.get("center", (0.0, 0.0)), spec["radius"], tube)
    if shape == "strip":
        return make_strip(spec["y_min"], spec["y_max"], tube)
    if shape == "complement":
        return complement(domain_from_spec(spec["base"]), tube)
    if shape in ("union", "intersection"):
        a, b = domain_from_spec(spec["a"]), domain_from_spec(spec["b"])
        blend = spec.get("blend_radius", DEFAULT_BLEND_RADIUS)
        build = smooth_union if shape == "union" else smooth_intersection
        return build(a, b, blend, tube)
    raise GeometryError(f"unknown shape {shape!r}")


# -- functional API ----------------------------------------------------------

def boundary_query(domain: Domain, x) -> BoundaryQuery:
    """Signed distance, outward normal at the foot point, and the foot point itself."""
    p, single = _as_points(x)
    q = domain.query(p)
    if single:
        return BoundaryQuery(float(q.signed_distance[0]), q.normal[0], q.foot_point[0],
                             bool(q.converged[0]))
    return q


def signed_distance(domain: Domain, x):
    """Signed distance to the boundary: negative inside, positive outside.

    Raises ``GeometryError`` if the closest-point iteration fails to converge.
    """
    p, single = _as_points(x)
    q = domain.query(p)
    if not q.converged.all():
        bad = np.flatnonzero(~q.converged)
        raise GeometryError(f"closest-point projection failed for point index {int(bad[0])}")
    return float(q.signed_distance[0]) if single else q.signed_distance


def d_grad_d(domain: Domain, x):
    """Restoring field: zero on the closed domain, ``d * grad d`` in the exterior tube.

    Raises ``OutsideTubeError`` for exterior points farther than ``tube_width``.
    """
    p, single = _as_points(x)
    out = np.zeros_like(p)
    # sign(phi) == sign(d_s), so only points with phi > 0 need a projection
    cand = np.flatnonzero(domain.level_set(p) > 0)
    if cand.size:
        q = domain.query(p[cand])
        d = q.signed_distance
        far = (d > domain.tube_width) | ~q.converged
        if far.any():
            raise OutsideTubeError(cand[far], d[far], domain.tube_width)
        outside = d > 0
        out[cand[outside]] = d[outside, None] * q.normal[outside]
    return out[0] if single else out


def exterior_distance(domain: Domain, x) -> np.ndarray:
    """``max(d_s, 0)`` per point: exact projection only where ``phi > 0``."""
    p, single = _as_points(x)
    out = np.zeros(len(p))
    idx = np.flatnonzero(domain.level_set(p) > 0)
    if idx.size:
        q = domain.query(p[idx])
        if not q.converged.all():
            raise GeometryError(
                f"closest-point projection failed for point index {int(idx[~q.converged][0])}")
        out[idx] = q.signed_distance
    return float(out[0]) if single else out
