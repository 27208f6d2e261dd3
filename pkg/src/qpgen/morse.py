"""Critical points of trigonometric potentials and the Morse / unique-extrema checks.

Critical points are located by damped Newton iteration on ``grad V = 0``
started from a uniform seed grid, then deduplicated modulo the torus.  Every
verdict is tolerance based and the tolerances used are echoed in the reports.
"""
from dataclasses import asdict, dataclass, field, replace
import itertools
import warnings

import numpy as np

from .potential import ConstantPotentialError, torus_distance, torus_delta, wrap

FOUR_PI_SQ = 4.0 * np.pi**2


@dataclass(frozen=True)
class MorseOptions:
    """Search and verdict knobs.  ``None`` means the scale-aware default."""

    grid_per_axis: int = None
    newton_tol: float = None
    max_iters: int = 60
    dedup_radius: float = 1e-6
    degeneracy_tol: float = None
    extremum_gap_tol: float = None
    max_refinements: int = 2

    def resolve(self, V):
        norm = V.l1_norm
        n = max(V.shape.n, 1)
        return replace(
            self,
            grid_per_axis=self.grid_per_axis or max(8, 4 * V.shape.n + 1),
            newton_tol=self.newton_tol or 1e-10 * 2.0 * np.pi * n * norm,
            degeneracy_tol=self.degeneracy_tol or 1e-8 * FOUR_PI_SQ**V.d * norm,
            extremum_gap_tol=self.extremum_gap_tol or 1e-8 * norm,
        )


@dataclass
class CriticalPoint:
    location: np.ndarray
    value: float
    hessian_det: float
    morse_index: int  # None when degenerate
    degenerate: bool
    residual: float
    seeds_converged: int

    def to_dict(self):
        out = asdict(self)
        out["location"] = [float(v) for v in self.location]
        return out


@dataclass
class SearchResult:
    points: list
    seeds: int
    discarded: int
    grid_per_axis: int

    @property
    def warning(self):
        return not self.points


@dataclass
class MorseReport:
    critical_points: list
    is_morse: bool
    min_abs_hessian_det: float
    euler_sum: int
    search_exhaustive: bool
    degeneracy_tol: float
    grid_per_axis: int
    seeds_discarded: int
    warning: bool = False

    def to_dict(self):
        out = asdict(self)
        out["critical_points"] = [p.to_dict() for p in self.critical_points]
        return out


@dataclass
class ExtremaReport:
    global_min: CriticalPoint
    global_max: CriticalPoint
    min_separation: float
    max_separation: float
    unique_min: bool
    unique_max: bool
    extremum_gap_tol: float = field(default=0.0)

    def to_dict(self):
        out = asdict(self)
        out["global_min"] = self.global_min.to_dict()
        out["global_max"] = self.global_max.to_dict()
        return out


def seed_grid(d, per_axis):
    ticks = np.arange(per_axis) / per_axis
    return np.array(list(itertools.product(ticks, repeat=d)), dtype=np.float64)


def _newton_steps(H, g, max_step):
    k, d = g.shape
    steps = np.zeros_like(g)
    scale = np.abs(H).reshape(k, -1).max(axis=1)
    det = np.linalg.det(H)
    ok = np.abs(det) > 1e-300 + 1e-14 * scale**d
    if ok.any():
        steps[ok] = -np.linalg.solve(H[ok], g[ok][..., None])[..., 0]
    bad = ~ok | ~np.all(np.isfinite(steps), axis=1)
    if bad.any():
        gn = np.linalg.norm(g[bad], axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            steps[bad] = np.where(gn > 0, -0.5 * max_step * g[bad] / gn, 0.0)
    norms = np.linalg.norm(steps, axis=1)
    big = norms > max_step
    steps[big] *= (max_step / norms[big])[:, None]
    return steps


def newton_polish(V, X, max_iters=60, max_halvings=30):
    """Damped Newton on ``grad V`` from each row of ``X``.

    Each seed keeps iterating until the gradient norm can no longer be
    decreased, its step underflows, or ``max_iters`` is reached.  Returns the
    final points and gradient norms.
    """
    X = wrap(np.array(X, dtype=np.float64))
    max_step = 0.25 / max(V.shape.n, 1)
    gnorm = np.linalg.norm(V.jets(X, 1)[1], axis=1)
    alive = gnorm > 0
    for _ in range(max_iters):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        _, g, H = V.jets(X[idx], 2)
        step = _newton_steps(H, g, max_step)
        tiny = np.linalg.norm(step, axis=1) < 1e-15
        alpha = np.ones(idx.size)
        pending = np.flatnonzero(~tiny)
        stalled = tiny.copy()
        for _ in range(max_halvings):
            if pending.size == 0:
                break
            trial = wrap(X[idx[pending]] + alpha[pending, None] * step[pending])
            gt = np.linalg.norm(V.jets(trial, 1)[1], axis=1)
            ok = gt < gnorm[idx[pending]]
            acc = pending[ok]
            X[idx[acc]] = trial[ok]
            gnorm[idx[acc]] = gt[ok]
            pending = pending[~ok]
            alpha[pending] *= 0.5
        stalled[pending] = True
        alive[idx[stalled]] = False
        alive &= gnorm > 0
    return X, gnorm


def find_critical_points(V, opts=None):
    """Critical points of ``V`` sorted by value, then location.

    Raises
    ------
    ConstantPotentialError
        If ``V`` is constant (every point is critical).
    """
    if V.is_constant:
        raise ConstantPotentialError("constant potential: every point is critical")
    o = (opts or MorseOptions()).resolve(V)
    seeds = seed_grid(V.d, o.grid_per_axis)
    X, gnorm = newton_polish(V, seeds, o.max_iters)
    conv = np.flatnonzero(gnorm <= o.newton_tol)
    discarded = len(seeds) - conv.size

    reps, counts = [], []
    for i in conv[np.argsort(gnorm[conv], kind="stable")]:
        for c, r in enumerate(reps):
            if torus_distance(X[i], X[r]) <= o.dedup_radius:
                counts[c] += 1
                break
        else:
            reps.append(i)
            counts.append(1)

    points = []
    if reps:
        locs = X[reps]
        vals, _, hess = V.jets(locs, 2)
        for k, i in enumerate(reps):
            det = float(np.linalg.det(hess[k]))
            degenerate = abs(det) <= o.degeneracy_tol
            index = None if degenerate else int(np.sum(np.linalg.eigvalsh(hess[k]) < 0))
            points.append(CriticalPoint(
                location=locs[k].copy(), value=float(vals[k]), hessian_det=det,
                morse_index=index, degenerate=degenerate, residual=float(gnorm[i]),
                seeds_converged=counts[k]))
    points.sort(key=lambda p: (p.value, tuple(p.location)))
    if not points:
        warnings.warn("no critical point converged for a nonconstant potential", RuntimeWarning)
    return SearchResult(points, len(seeds), discarded, o.grid_per_axis)


def _morse_summary(points, d):
    nondeg = [p for p in points if not p.degenerate]
    euler = sum((-1) ** p.morse_index for p in nondeg)
    exhaustive = bool(points) and len(nondeg) == len(points) and euler == 0 and len(points) >= 2**d
    return euler, exhaustive


def verify_morse(V, opts=None):
    """Morse verdict for ``V``.

    ``is_morse`` is true when the search produced points and none is
    degenerate.  When all points are non-degenerate but the Morse-theory
    consistency check (Euler sum 0, at least 2^d points) fails, the seed grid is
    doubled up to ``max_refinements`` times; if it still fails the report
    carries ``search_exhaustive = False``.
    """
    o = (opts or MorseOptions()).resolve(V)
    res = find_critical_points(V, o)
    euler, exhaustive = _morse_summary(res.points, V.d)
    for _ in range(o.max_refinements):
        if exhaustive or any(p.degenerate for p in res.points):
            break
        o = replace(o, grid_per_axis=2 * o.grid_per_axis)
        res = find_critical_points(V, o)
        euler, exhaustive = _morse_summary(res.points, V.d)
    dets = [abs(p.hessian_det) for p in res.points]
    return MorseReport(
        critical_points=res.points,
        is_morse=bool(res.points) and not any(p.degenerate for p in res.points),
        min_abs_hessian_det=min(dets) if dets else 0.0,
        euler_sum=int(euler),
        search_exhaustive=bool(exhaustive),
        degeneracy_tol=o.degeneracy_tol,
        grid_per_axis=res.grid_per_axis,
        seeds_discarded=res.discarded,
        warning=res.warning,
    )


def verify_unique_extrema(V, opts=None, points=None):
    """Whether the global minimum and maximum are each attained once.

    Ties closer than ``extremum_gap_tol`` count as non-unique.
    """
    o = (opts or MorseOptions()).resolve(V)
    if points is None:
        points = find_critical_points(V, o).points
    if len(points) < 2:
        raise ValueError(f"need at least 2 critical points, found {len(points)}")
    pts = sorted(points, key=lambda p: p.value)
    min_sep = pts[1].value - pts[0].value
    max_sep = pts[-1].value - pts[-2].value
    return ExtremaReport(
        global_min=pts[0], global_max=pts[-1],
        min_separation=float(min_sep), max_separation=float(max_sep),
        unique_min=bool(min_sep > o.extremum_gap_tol),
        unique_max=bool(max_sep > o.extremum_gap_tol),
        extremum_gap_tol=o.extremum_gap_tol,
    )


def critical_value_range(V, opts=None, points=None):
    """(min V, max V) over the found critical points; exact for constant V."""
    if V.is_constant:
        return V.const, V.const
    if points is None:
        points = find_critical_points(V, opts).points
    vals = [p.value for p in points]
    return min(vals), max(vals)


__all__ = [
    "MorseOptions", "CriticalPoint", "MorseReport", "ExtremaReport", "find_critical_points",
    "verify_morse", "verify_unique_extrema", "critical_value_range", "newton_polish",
    "seed_grid", "torus_delta",
]
