"""Scenario configuration, initial data, builtin experiments, persistence, rendering.

A scenario is a JSON document::

    {
      "name": "circle_case1",
      "scale": "desk",
      "domain": {"shape": "disk", "center": [0, 0], "radius": 1.0},
      "potential": {"interaction": {"kind": "inverse_power", "exponent": 1.0},
                    "external": {"kind": "none"}},
      "integrator": {"scheme": "projected_rk4", "dt": 0.5, "record_every": 1,
                     "contact_tolerance": 1e-6},
      "n": 100,
      "initial_condition": {"kind": "uniform_rejection", "min_separation": 0.137,
                            "region": {"shape": "disk", "center": [0, 0], "radius": 1.0},
                            "seed": 1},
      "T": 300.0,
      "color": {"kind": "disk", "center": [0, 0], "radius": 0.5}
    }

A run directory holds ``config.json``, ``trajectory.csv`` (one row per
particle per frame), ``frames.csv`` (one row per frame), ``run.json``,
``diagnostics.txt`` (flat ``key = value``) and ``summary.csv`` (one row per
check).
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .dynamics import IntegratorConfig, SimulationAborted, Trajectory, mild_solution_residual, simulate
from .energy import EnergyModel, ExternalPotential, model_from_spec
from .geometry import Disk, Domain, Strip, domain_from_spec

log = logging.getLogger(__name__)

OUTPUT_ENV = "CONFINEDFLOW_OUTPUT"
MAX_PACKING = 0.55
DRAWS_PER_POINT = 10**6


class SamplingError(RuntimeError):
    pass


# -- configuration -------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    name: str
    domain: dict
    potential: dict
    integrator: dict
    n: int
    initial_condition: dict
    T: float
    scale: str = "desk"
    color: dict = field(default_factory=lambda: {"kind": "none"})
    output_dir: str | None = None
    description: str = ""
    long_running: bool = False

    def __post_init__(self):
        ic = self.initial_condition
        kind = ic.get("kind")
        if kind == "uniform_rejection":
            if not ic.get("min_separation", 0) > 0:
                raise ValueError("uniform_rejection needs min_separation > 0")
        elif kind == "grid":
            (x0, x1), (y0, y1) = ic["x_range"], ic["y_range"]
            if not (x1 > x0 and y1 > y0):
                raise ValueError("grid region is empty")
        elif kind != "explicit":
            raise ValueError(f"unknown initial condition kind {kind!r}")
        if self.n < 0 or self.T < 0:
            raise ValueError("n and T must be non-negative")
        # validate the sub-schemas eagerly
        domain_from_spec(self.domain)
        model_from_spec(self.potential)
        IntegratorConfig.from_spec(self.integrator)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        return cls(**copy.deepcopy(d))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(text))

    def build(self) -> tuple[Domain, EnergyModel, IntegratorConfig]:
        return (domain_from_spec(self.domain), model_from_spec(self.potential),
                IntegratorConfig.from_spec(self.integrator))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        ic = dict(self.initial_condition, seed=seed)
        return replace(self, initial_condition=ic)


def load_config(path) -> ScenarioConfig:
    return ScenarioConfig.loads(Path(path).read_text())


def save_config(config: ScenarioConfig, path) -> None:
    Path(path).write_text(config.dumps() + "\n")


# -- initial conditions -----------------------------------------------------------------

def _region_area(region: dict) -> float:
    if region["shape"] == "disk":
        return math.pi * region["radius"] ** 2
    (x0, x1), (y0, y1) = region["x_range"], region["y_range"]
    return (x1 - x0) * (y1 - y0)


def _draw(region: dict, rng: np.random.Generator, size: int) -> np.ndarray:
    if region["shape"] == "disk":
        c = np.asarray(region.get("center", (0.0, 0.0)), dtype=float)
        r = region["radius"] * np.sqrt(rng.random(size))
        th = 2 * np.pi * rng.random(size)
        pts = c + np.column_stack([r * np.cos(th), r * np.sin(th)])
        # keep the open disk
        return pts[np.linalg.norm(pts - c, axis=1) < region["radius"]]
    if region["shape"] == "rectangle":
        (x0, x1), (y0, y1) = region["x_range"], region["y_range"]
        pts = np.column_stack([rng.uniform(x0, x1, size), rng.uniform(y0, y1, size)])
        return pts[(pts[:, 0] > x0) & (pts[:, 1] > y0)]
    raise ValueError(f"unknown region shape {region['shape']!r}")


def sample_initial_uniform(region: dict, n: int, min_separation: float,
                           seed: int) -> np.ndarray:
    """Random sequential addition: uniform draws, rejected if closer than ``min_separation``.

    ``region`` is ``{"shape": "disk", "center", "radius"}`` or
    ``{"shape": "rectangle", "x_range", "y_range"}``.
    """
    if not min_separation > 0:
        raise ValueError("min_separation must be positive")
    packing = n * math.pi * (0.5 * min_separation) ** 2 / _region_area(region)
    if packing >= MAX_PACKING:
        raise SamplingError(
            f"packing fraction {packing:.3f} >= {MAX_PACKING}: reduce n or min_separation")
    rng = np.random.default_rng(seed)
    cell = min_separation
    grid: dict[tuple[int, int], list[int]] = {}
    pts = np.empty((n, 2))
    count, draws, budget = 0, 0, DRAWS_PER_POINT * max(n, 1)
    sep2 = min_separation ** 2
    while count < n:
        if draws >= budget:
            raise SamplingError(
                f"rejection budget of {budget} draws exhausted after {count}/{n} points; "
                "use a smaller n or min_separation")
        batch = _draw(region, rng, 1024)
        draws += 1024
        for p in batch:
            cx, cy = int(math.floor(p[0] / cell)), int(math.floor(p[1] / cell))
            ok = True
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for j in grid.get((cx + dx, cy + dy), ()):
                        if (pts[j, 0] - p[0]) ** 2 + (pts[j, 1] - p[1]) ** 2 < sep2:
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    break
            if ok:
                pts[count] = p
                grid.setdefault((cx, cy), []).append(count)
                count += 1
                if count == n:
                    break
    return pts


def sample_initial_grid(x_range, y_range, n: int) -> np.ndarray:
    """Cell-centred near-square grid of ``n`` points, row-major (x fastest, then y).

    Uses ``ny = round(sqrt(n h / w))`` rows and ``nx = ceil(n / ny)`` columns;
    each point is the centre of its cell, so points keep half a cell from the
    rectangle's edges.  When ``nx * ny > n`` the last row is left incomplete.
    """
    (x0, x1), (y0, y1) = x_range, y_range
    if n <= 0:
        return np.empty((0, 2))
    w, h = x1 - x0, y1 - y0
    ny = max(1, min(n, round(math.sqrt(n * h / w))))
    nx = math.ceil(n / ny)
    xs = x0 + (np.arange(nx) + 0.5) * w / nx
    ys = y0 + (np.arange(ny) + 0.5) * h / ny
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])[:n]


def initial_positions(config: ScenarioConfig) -> np.ndarray:
    ic = config.initial_condition
    if ic["kind"] == "uniform_rejection":
        return sample_initial_uniform(ic["region"], config.n, ic["min_separation"],
                                      ic.get("seed", 0))
    if ic["kind"] == "grid":
        return sample_initial_grid(ic["x_range"], ic["y_range"], config.n)
    return np.asarray(ic["positions"], dtype=float).reshape(-1, 2)


def color_mask(color: dict, X0: np.ndarray) -> np.ndarray:
    """Red/blue split of the initial positions (True = red)."""
    X0 = np.asarray(X0, dtype=float).reshape(-1, 2)
    kind = color.get("kind", "none")
    if kind == "disk":
        return np.linalg.norm(X0 - np.asarray(color["center"]), axis=1) < color["radius"]
    if kind == "below":
        return X0[:, 1] < color["y"]
    return np.zeros(len(X0), dtype=bool)


# -- builtin scenarios -------------------------------------------------------------------

PAPER_N_CIRCLE = 3000
PAPER_N_CHANNEL = 900
DESK_N = 100

BUMP = {"shape": "complement",
        "base": {"shape": "disk", "center": [3.8, -0.35], "radius": 0.6}}
HORSESHOE = {"shape": "complement",
             "base": {"shape": "intersection",
                      "a": {"shape": "disk", "center": [4.2, 0.6], "radius": 0.4},
                      "b": {"shape": "complement",
                            "base": {"shape": "disk", "center": [3.95, 0.6], "radius": 0.25}},
                      "blend_radius": 0.05}}
STRIP = {"shape": "strip", "y_min": 0.0, "y_max": 1.2}


def _circle(name, desk, dt, region, sep, color, T_paper, T_desk, domain=None, desc=""):
    n = DESK_N if desk else PAPER_N_CIRCLE
    # desk runs keep the full-size packing fraction: separation scales like 1/sqrt(n)
    sep = sep * math.sqrt(PAPER_N_CIRCLE / n)
    return ScenarioConfig(
        name=name, scale="desk" if desk else "paper",
        domain=domain or {"shape": "disk", "center": [0.0, 0.0], "radius": 1.0},
        potential={"interaction": {"kind": "inverse_power", "exponent": 1.0},
                   "external": {"kind": "none"}},
        integrator={"scheme": "projected_rk4", "dt": dt, "record_every": 1 if desk else 10,
                    "contact_tolerance": 1e-6},
        n=n,
        initial_condition={"kind": "uniform_rejection", "region": region,
                           "min_separation": round(sep, 4), "seed": 1},
        T=T_desk if desk else T_paper, color=color, description=desc, long_running=not desk)


def _channel(name, desk, domain, desc):
    n = DESK_N if desk else PAPER_N_CHANNEL
    return ScenarioConfig(
        name=name, scale="desk" if desk else "paper", domain=domain,
        potential={"interaction": {"kind": "inverse_power", "exponent": 1.0},
                   "external": {"kind": "linear", "coefficients": [-0.002, 0.0]}},
        integrator={"scheme": "projected_rk4", "dt": 0.5, "record_every": 1 if desk else 10,
                    "contact_tolerance": 1e-6},
        n=n,
        initial_condition={"kind": "grid", "x_range": [-1.7, 3.1], "y_range": [0.0, 1.2]},
        T=600.0 if desk else 2400.0, color={"kind": "below", "y": 0.6}, description=desc,
        long_running=not desk)


def builtin_scenarios() -> list[ScenarioConfig]:
    """Every builtin experiment, at paper scale and at desk scale."""
    unit = {"shape": "disk", "center": [0.0, 0.0], "radius": 1.0}
    half = {"shape": "disk", "center": [0.5, 0.0], "radius": 0.5}
    red_center = {"kind": "disk", "center": [0.0, 0.0], "radius": 0.5}
    red_offset = {"kind": "disk", "center": [0.5, 0.0], "radius": 0.25}
    dumbbell = {"shape": "union",
                "a": {"shape": "disk", "center": [0.5, 0.0], "radius": 0.5},
                "b": {"shape": "disk", "center": [-0.45, 0.0], "radius": 0.5},
                "blend_radius": 0.05}
    out = []
    for desk in (False, True):
        out += [
            _circle("circle_case1", desk, 0.5, unit, 0.025, red_center, 3000.0, 300.0,
                    desc="unit disk, uniform start"),
            _circle("circle_case2", desk, 0.5, half, 0.012, red_offset, 3000.0, 300.0,
                    desc="unit disk, start packed in the right half-disk"),
            _circle("circle_case2_dt3", desk, 3.0, half, 0.012, red_offset, 3000.0, 300.0,
                    desc="circle_case2 with dt = 3 (unstable)"),
            _circle("dumbbell", desk, 0.25, half, 0.012, red_offset, 2000.0, 300.0,
                    domain=dumbbell, desc="two blended disks, start as circle_case2"),
            _channel("channel_plain", desk, STRIP, "channel without obstacle"),
            _channel("channel_bump", desk,
                     {"shape": "intersection", "a": STRIP, "b": BUMP, "blend_radius": 0.05},
                     "channel with a bump on the lower wall"),
            _channel("channel_horseshoe", desk,
                     {"shape": "intersection", "a": STRIP, "b": HORSESHOE, "blend_radius": 0.05},
                     "channel with a horseshoe obstacle open upstream"),
        ]
    return out


def get_builtin(name: str, desk: bool = True) -> ScenarioConfig:
    scale = "desk" if desk else "paper"
    for cfg in builtin_scenarios():
        if cfg.name == name and cfg.scale == scale:
            return cfg
    names = sorted({c.name for c in builtin_scenarios()})
    raise KeyError(f"no builtin scenario {name!r}; available: {', '.join(names)}")


# -- benchmarks ------------------------------------------------------------------------------

@dataclass(frozen=True)
class Benchmark:
    """A small fixed problem used by the convergence and stability studies."""

    name: str
    domain: Domain
    model: EnergyModel
    X0: np.ndarray
    T: float


def constant_force_benchmark() -> Benchmark:
    """One particle in the unit disk under the constant force (0.5, 0), starting at (0.9, 0).

    It reaches the wall at t = 0.2 and then stays pinned at (1, 0), so the
    penalty run sits ``0.5 / k`` outside for the rest of the run.
    """
    model = EnergyModel(external=ExternalPotential((-0.5, 0.0)))
    return Benchmark("constant_force", Disk((0.0, 0.0), 1.0), model,
                     np.array([[0.9, 0.0]]), 0.5)


def stability_benchmark(seed: int = 3) -> Benchmark:
    """Twenty particles in the unit disk with Coulomb repulsion."""
    X0 = sample_initial_uniform({"shape": "disk", "center": [0.0, 0.0], "radius": 1.0},
                                20, 0.3, seed)
    return Benchmark("stability", Disk((0.0, 0.0), 1.0), EnergyModel(), X0, 10.0)


BENCHMARKS = {"constant_force": constant_force_benchmark}


# -- running -------------------------------------------------------------------------------

def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def run_scenario(config: ScenarioConfig, out_dir=None, write: bool = True) -> Trajectory:
    """Sample, simulate, run the diagnostics suite and (optionally) write the outputs."""
    domain, model, integ = config.build()
    X0 = initial_positions(config)
    if len(X0) and domain.level_set(X0).max() > 0:
        raise ValueError(f"initial positions of {config.name!r} leave the domain")
    try:
        traj = simulate(domain, model, X0, integ, config.T)
    except SimulationAborted as err:
        traj = err.trajectory
        log.error("%s", err)
    traj.meta = config.to_dict()
    reports = diag.run_suite(traj, domain, model)
    info = {}
    if integ.scheme == "projected_rk4" and traj.n_frames > 1:
        info["mild_residual"] = mild_solution_residual(traj, domain, model)
    red = color_mask(config.color, traj.positions[0])
    if config.color.get("kind") == "disk" and red.any() and not red.all():
        info["ordering_statistic"] = diag.ordering_statistic(
            traj.positions[0], traj.positions[-1], red, config.color["center"])
    traj.diagnostics = {"reports": reports, "info": info}
    if write:
        out = Path(out_dir) if out_dir else (
            Path(config.output_dir) if config.output_dir else default_output_root() / config.name)
        write_trajectory(traj, out)
    return traj


# -- persistence ----------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_trajectory(traj: Trajectory, path) -> Path:
    """Write a run directory; positions round-trip exactly (``repr`` floats)."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(traj.meta, indent=2, sort_keys=True) + "\n")
    run = {"integrator": traj.integrator.spec(), "max_force_norm": traj.max_force_norm,
           "error": traj.error, "n_frames": traj.n_frames, "n_particles": traj.n_particles}
    (out / "run.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n")
    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "t", "particle", "x", "y", "on_boundary"])
        for m in range(traj.n_frames):
            t = repr(float(traj.times[m]))
            for i, (x, y) in enumerate(traj.positions[m]):
                w.writerow([m, t, i, repr(float(x)), repr(float(y)), int(traj.flags[m, i])])
    with open(out / "frames.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "t", "energy", "min_separation", "max_force"])
        for m in range(traj.n_frames):
            w.writerow([m] + [repr(float(v)) for v in (traj.times[m], traj.energy[m],
                                                      traj.min_separation[m], traj.max_force[m])])
    reports = traj.diagnostics.get("reports", []) if traj.diagnostics else []
    if reports:
        write_reports(reports, out, traj.diagnostics.get("info", {}))
    return out


def write_reports(reports, out: Path, info: dict | None = None) -> None:
    flat = {}
    for r in reports:
        flat.update(r.as_flat())
    for k, v in (info or {}).items():
        flat[f"info.{k}"] = v
    flat["all_passed"] = diag.all_passed(reports)
    lines = [f"{k} = {_fmt(v)}" for k, v in flat.items()]
    (Path(out) / "diagnostics.txt").write_text("\n".join(lines) + "\n")
    with open(Path(out) / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "status", "measured", "threshold", "n_offending"])
        for r in reports:
            status = "skip" if r.skipped else ("pass" if r.passed else "fail")
            w.writerow([r.name, status, _fmt(r.measured), _fmt(r.threshold), len(r.offending)])


def read_trajectory(path) -> Trajectory:
    """Inverse of ``write_trajectory`` (diagnostics are not reloaded)."""
    src = Path(path)
    if src.is_file():
        src = src.parent
    meta = json.loads((src / "config.json").read_text())
    run = json.loads((src / "run.json").read_text())
    n_frames, n = run["n_frames"], run["n_particles"]
    times = np.empty(n_frames)
    pos = np.empty((n_frames, n, 2))
    flags = np.zeros((n_frames, n), dtype=bool)
    with open(src / "trajectory.csv", newline="") as fh:
        rows = csv.reader(fh)
        next(rows)
        for frame, t, i, x, y, onb in rows:
            m, i = int(frame), int(i)
            times[m] = float(t)
            pos[m, i] = float(x), float(y)
            flags[m, i] = onb == "1"
    with open(src / "frames.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    cols = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(-1, 4)
    times[:] = cols[:, 0]
    return Trajectory(times, pos, flags, cols[:, 1], cols[:, 2], cols[:, 3],
                      IntegratorConfig.from_spec(run["integrator"]), run["max_force_norm"],
                      meta=meta, error=run["error"])


# -- rendering -------------------------------------------------------------------------------

def _strip_of(domain: Domain) -> Strip | None:
    if isinstance(domain, Strip):
        return domain
    for child in (getattr(domain, "a", None), getattr(domain, "b", None)):
        if child is not None and (found := _strip_of(child)) is not None:
            return found
    return None


def _view_box(domain: Domain, traj: Trajectory, margin: float = 0.1):
    """Domain bounding box, or the particle extents for unbounded domains."""
    box = domain.bounding_box()
    if box is None:
        pts = traj.positions.reshape(-1, 2)
        if len(pts):
            box = [pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max()]
        else:
            box = [-1.0, 1.0, -1.0, 1.0]
        strip = _strip_of(domain)
        if strip is not None:
            box[2], box[3] = strip.y_min, strip.y_max
        if box[1] - box[0] < 1e-9:
            box[0], box[1] = box[0] - 1.0, box[1] + 1.0
    x0, x1, y0, y1 = box
    return x0 - margin, x1 + margin, y0 - margin, y1 + margin


def _outline_paths(domain: Domain, box, resolution: int = 400) -> list[np.ndarray]:
    if isinstance(domain, Disk):
        th = np.linspace(0, 2 * np.pi, 361)
        c = np.asarray(domain.center)
        return [c + domain.radius * np.column_stack([np.cos(th), np.sin(th)])]
    import contourpy

    x0, x1, y0, y1 = box
    nx = resolution
    ny = max(2, int(resolution * (y1 - y0) / (x1 - x0)))
    xs, ys = np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)
    gx, gy = np.meshgrid(xs, ys)
    phi = domain.level_set(np.column_stack([gx.ravel(), gy.ravel()])).reshape(gy.shape)
    return [np.asarray(line) for line in contourpy.contour_generator(xs, ys, phi).lines(0.0)]


def render_frame(traj: Trajectory, frame: int, path, domain: Domain | None = None,
                 width: int = 800) -> Path:
    """SVG of one frame: domain outline plus particles coloured by their start position."""
    if domain is None:
        domain = domain_from_spec(traj.meta["domain"])
    color = traj.meta.get("color", {"kind": "none"})
    box = _view_box(domain, traj)
    x0, x1, y0, y1 = box
    scale = width / (x1 - x0)
    height = int(round((y1 - y0) * scale))

    def sx(x):
        return (x - x0) * scale

    def sy(y):
        return (y1 - y) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    for line in _outline_paths(domain, box):
        d = " ".join(f"{sx(x):.3f},{sy(y):.3f}" for x, y in line)
        out.append(f'<polyline points="{d}" fill="none" stroke="black" stroke-width="1.5"/>')
    X = traj.positions[frame] if traj.n_particles else np.empty((0, 2))
    red = color_mask(color, traj.positions[0]) if traj.n_particles else np.zeros(0, bool)
    radius = max(1.5, min(4.0, 0.35 * width / max(1.0, math.sqrt(len(X))) / 10))
    for (x, y), r in zip(X, red):
        fill = "#d62728" if r else "#1f77b4"
        out.append(f'<circle cx="{sx(x):.3f}" cy="{sy(y):.3f}" r="{radius:.2f}" fill="{fill}"/>')
    out.append(f'<text x="8" y="18" font-family="monospace" font-size="14">'
               f't = {traj.times[frame]:.6g}</text>')
    out.append("</svg>")
    p = Path(path)
    p.write_text("\n".join(out) + "\n")
    return p
