"""Sublevel-set measures behind the two Cartan-type conditions.

For a potential ``V`` on ``T^d`` and a scale ``K`` the conditions bound the
measure of

    condition3:  { x : min(|V(x+h) - V(x)|, |g_{h,i,j}(x)|) < e^-K }
    condition4:  { x : min(|V(x) - eta|, |<grad V(x), h0>|) < e^-K }

by ``exp(-K**c1)``, where ``g_{h,i,j}`` is the 2x2 determinant of the
``(i, j)`` gradient components at ``x`` and ``x + h``.  Measures are
estimated by Monte Carlo with exact binomial (Clopper-Pearson) bounds.
"""
from dataclasses import asdict, dataclass, field
import csv
import itertools
import math

import numpy as np
from scipy.stats import beta

from . import kernels
from .morse import critical_value_range
from .potential import torus_norm
from .rng import Xoshiro256pp, uniform_torus_points

CONDITION3 = "condition3"
CONDITION4 = "condition4"
MIN_SAMPLES = 10_000
CONFIDENCE = 0.99


@dataclass(frozen=True)
class CartanQuery:
    """One instance of condition 3 or 4.

    ``pair=None`` for condition 3 means the minimum of ``|g|`` over all axis
    pairs.  Axes are zero-based.
    """

    kind: str
    K: float
    c1: float = 0.3
    h: tuple = None
    pair: tuple = None
    eta: float = None
    h0: tuple = None

    def validate(self, d):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 0 < self.c1 < 1:
            raise ValueError("c1 must lie in (0, 1)")
        if self.kind == CONDITION3:
            if d < 2:
                raise ValueError("condition3 needs d >= 2")
            if self.h is None or len(self.h) != d:
                raise ValueError(f"condition3 needs a shift h with {d} entries")
            if torus_norm(np.asarray(self.h, dtype=np.float64)) < math.exp(-self.K):
                raise ValueError("condition3 requires ||h|| >= exp(-K)")
            if self.pair is not None:
                i, j = self.pair
                if not 0 <= i < j < d:
                    raise ValueError(f"pair must satisfy 0 <= i < j < {d}")
        elif self.kind == CONDITION4:
            if self.eta is None or not math.isfinite(self.eta):
                raise ValueError("condition4 needs a finite eta")
            if self.h0 is None or len(self.h0) != d:
                raise ValueError(f"condition4 needs a direction h0 with {d} entries")
            if abs(np.linalg.norm(self.h0) - 1.0) > 1e-12:
                raise ValueError("h0 must be a unit vector")
        else:
            raise ValueError(f"unknown condition kind {self.kind!r}")

    @property
    def threshold(self):
        return math.exp(-self.K)

    @property
    def bound(self):
        return math.exp(-self.K**self.c1)


@dataclass(frozen=True)
class Sampler:
    samples: int = 100_000
    seed: int = 0

    def points(self, d):
        if self.samples < MIN_SAMPLES:
            raise ValueError(f"need at least {MIN_SAMPLES} samples")
        return uniform_torus_points(self.seed, self.samples, d)


@dataclass
class SublevelMeasureEstimate:
    estimate: float
    upper_conf: float
    lower_conf: float
    samples: int
    hits: int
    threshold: float
    budget_limited: bool


def clopper_pearson_upper(hits, n, conf=CONFIDENCE):
    """One-sided exact binomial upper confidence bound."""
    if hits >= n:
        return 1.0
    return float(beta.ppf(conf, hits + 1, n - hits))


def clopper_pearson_lower(hits, n, conf=CONFIDENCE):
    if hits <= 0:
        return 0.0
    return float(beta.ppf(1.0 - conf, hits, n - hits + 1))


def clopper_pearson_interval(hits, n, conf=CONFIDENCE):
    """Two-sided exact binomial interval at level ``conf``."""
    a = 0.5 * (1.0 - conf)
    lo = 0.0 if hits <= 0 else float(beta.ppf(a, hits, n - hits + 1))
    hi = 1.0 if hits >= n else float(beta.ppf(1.0 - a, hits + 1, n - hits))
    return lo, hi


def make_estimate(hits, n, threshold):
    hits = int(hits)
    return SublevelMeasureEstimate(
        estimate=hits / n,
        upper_conf=clopper_pearson_upper(hits, n),
        lower_conf=clopper_pearson_lower(hits, n),
        samples=int(n), hits=hits, threshold=float(threshold),
        budget_limited=bool(threshold < 10.0 / n),
    )


def g_det(V, h, i, j, x):
    """``d_i V(x) d_j V(x+h) - d_j V(x) d_i V(x+h)``."""
    if V.d < 2 or i == j:
        raise ValueError("g_det needs d >= 2 and i != j")
    x = np.asarray(x, dtype=np.float64).reshape(1, V.d)
    h = np.asarray(h, dtype=np.float64).reshape(1, V.d)
    g0 = V.jets(x, 1)[1][0]
    g1 = V.jets(x + h, 1)[1][0]
    return float(g0[i] * g1[j] - g0[j] * g1[i])


def _pairs(d, pair):
    return [tuple(pair)] if pair is not None else list(itertools.combinations(range(d), 2))


def condition3_statistic(V, pts, h, pair=None, base=None):
    """Per-sample ``min(|V(x+h) - V(x)|, |g|)`` (``|g|`` minimized over pairs)."""
    v0, g0 = base if base is not None else V.jets(pts, 1)[:2]
    vh, gh = V.jets(pts + np.asarray(h, dtype=np.float64)[None, :], 1)[:2]
    stat = np.abs(vh - v0)
    for i, j in _pairs(V.d, pair):
        np.minimum(stat, np.abs(g0[:, i] * gh[:, j] - g0[:, j] * gh[:, i]), out=stat)
    return stat


def condition4_statistic(V, pts, eta, h0, base=None):
    v0, g0 = base if base is not None else V.jets(pts, 1)[:2]
    return np.minimum(np.abs(v0 - eta), np.abs(g0 @ np.asarray(h0, dtype=np.float64)))


def estimate_sublevel_measure(q, V, sampler=None):
    """Monte-Carlo estimate of the measure of the query's sublevel set."""
    sampler = sampler or Sampler()
    q.validate(V.d)
    pts = sampler.points(V.d)
    if q.kind == CONDITION3:
        stat = condition3_statistic(V, pts, q.h, q.pair)
    else:
        stat = condition4_statistic(V, pts, q.eta, q.h0)
    hits = int(np.count_nonzero(stat < q.threshold))
    return make_estimate(hits, sampler.samples, q.threshold)


def quadrature_measure(q, V, per_axis, chunk=1 << 20):
    """Midpoint-rule measure of the sublevel set on a ``per_axis**d`` tensor grid.

    Deterministic oracle for d <= 2; points are streamed in chunks.
    """
    q.validate(V.d)
    if V.d > 2:
        raise ValueError("tensor-grid quadrature is limited to d <= 2")
    total = per_axis**V.d
    hits = 0
    for lo in range(0, total, chunk):
        flat = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        idx = [flat] if V.d == 1 else [flat // per_axis, flat % per_axis]
        pts = (np.column_stack(idx) + 0.5) / per_axis
        if q.kind == CONDITION3:
            stat = condition3_statistic(V, pts, q.h, q.pair)
        else:
            stat = condition4_statistic(V, pts, q.eta, q.h0)
        hits += int(np.count_nonzero(stat < q.threshold))
    return hits / total


@dataclass
class ConditionCheck:
    verdict: str  # "pass", "fail" or "inconclusive"
    est: SublevelMeasureEstimate
    bound: float

    @property
    def passed(self):
        return self.verdict == "pass"


def verdict_for(est, bound):
    """``pass`` if the upper bound clears ``bound``; ``fail`` if even the lower
    bound exceeds it; otherwise ``inconclusive``."""
    if est.upper_conf <= bound:
        return "pass"
    if est.lower_conf > bound:
        return "fail"
    return "inconclusive"


def check_condition(q, V, sampler=None):
    est = estimate_sublevel_measure(q, V, sampler)
    return ConditionCheck(verdict_for(est, q.bound), est, q.bound)


@dataclass(frozen=True)
class SweepGrids:
    h_count: int = 64
    eta_count: int = 32
    h0_count: int = 32


def shift_grid(d, count):
    """Uniform torus grid with about ``count`` points (``round(count**(1/d))`` per axis)."""
    k = max(1, int(round(count ** (1.0 / d))))
    ticks = np.arange(k) / k
    return np.array(list(itertools.product(ticks, repeat=d)), dtype=np.float64)


def direction_grid(d, count):
    """Unit directions: ``+1`` for d=1, half-circle angles for d=2, a
    Fibonacci sphere for d=3, seeded Gaussian directions beyond."""
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        th = np.pi * np.arange(count) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    if d == 3:
        k = np.arange(count) + 0.5
        z = 1.0 - 2.0 * k / count
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (3.0 - math.sqrt(5.0)) * k
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    g = Xoshiro256pp(d).normals(d * count).reshape(count, d)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass
class DecayTable:
    kind: str
    rows: list
    alpha: float = None  # fitted decay exponent; None when unavailable
    c1: float = 0.3
    pair_mode: str = "min"
    grids: SweepGrids = field(default_factory=SweepGrids)
    seed: int = 0
    samples: int = 0

    CSV_COLUMNS = ("K", "kind", "worst_estimate", "worst_upper_conf", "bound", "pass",
                   "budget_limited", "h_count", "eta_count", "h0_count", "seed")

    @property
    def verdict(self):
        verdicts = [r["pass"] for r in self.rows]
        if not verdicts or any(v == "fail" for v in verdicts):
            return "fail"
        if all(v == "pass" for v in verdicts):
            return "pass"
        return "inconclusive"

    def counts(self):
        out = {"pass": 0, "fail": 0, "inconclusive": 0}
        for r in self.rows:
            out[r["pass"]] += 1
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            self.write_rows(fh)

    def write_rows(self, fh):
        w = csv.writer(fh)
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.CSV_COLUMNS])

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha, "c1": self.c1, "pair_mode": self.pair_mode,
                "grids": asdict(self.grids), "seed": self.seed, "samples": self.samples,
                "verdict": self.verdict, "rows": self.rows}


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def fit_decay(Ks, estimates):
    """Slope ``alpha`` of ``log(measure) ~ log C - alpha K``; None with < 2 points."""
    if len(Ks) < 2:
        return None
    slope = np.polyfit(np.asarray(Ks, dtype=np.float64), np.log(estimates), 1)[0]
    return float(-slope)


def cartan_sweep(V, kind, K_list=tuple(range(2, 11)), grids=None, sampler=None, c1=0.3,
                 pair=None, eta_range=None, morse_opts=None):
    """Check a condition over a deterministic geometry grid for every K.

    Condition 3 scans shifts ``h`` on a torus grid (skipping ``||h|| <
    exp(-K)``); condition 4 scans levels ``eta`` spread over ``[min V, max V]``
    and directions ``h0``.  All geometries share one sample set, so the
    measures are exactly non-increasing in ``K``.
    """
    grids = grids or SweepGrids()
    sampler = sampler or Sampler()
    Ks = [float(k) for k in K_list]
    if not Ks:
        raise ValueError("K_list is empty")
    if any(b <= a for a, b in zip(Ks, Ks[1:])):
        raise ValueError("K_list must be strictly ascending")
    if Ks[0] < 1:
        raise ValueError("K must be >= 1")
    d = V.d
    n = sampler.samples
    pts = sampler.points(d)
    v0, g0 = V.jets(pts, 1)[:2]
    eps = np.exp(-np.asarray(Ks))

    # hits[g, k] and validity mask per geometry
    if kind == CONDITION4:
        if eta_range is None:
            eta_range = critical_value_range(V, morse_opts)
        etas = np.linspace(eta_range[0], eta_range[1], grids.eta_count)
        dirs = direction_grid(d, grids.h0_count)
        hits = kernels.cond4_hits(v0, g0, etas, np.ascontiguousarray(dirs), eps)
        hits = hits.reshape(-1, len(Ks))
        valid = np.ones_like(hits, dtype=bool)
    elif kind == CONDITION3:
        if d < 2:
            raise ValueError("condition3 needs d >= 2")
        shifts = shift_grid(d, grids.h_count)
        norms = torus_norm(shifts)
        hits = np.zeros((len(shifts), len(Ks)), dtype=np.int64)
        valid = norms[:, None] >= eps[None, :]
        for k, h in enumerate(shifts):
            if not valid[k].any():
                continue
            stat = np.sort(condition3_statistic(V, pts, h, pair, base=(v0, g0)))
            hits[k] = np.searchsorted(stat, eps, side="left")
    else:
        raise ValueError(f"unknown condition kind {kind!r}")

    rows = []
    for kk, K in enumerate(Ks):
        bound = math.exp(-K**c1)
        col = hits[valid[:, kk], kk]
        worst = int(col.max()) if col.size else 0
        est = make_estimate(worst, n, eps[kk])
        verdicts = {verdict_for(make_estimate(hh, n, eps[kk]), bound) for hh in np.unique(col)}
        if not col.size:
            verdict = "inconclusive"
        elif "fail" in verdicts:
            verdict = "fail"
        elif verdicts == {"pass"}:
            verdict = "pass"
        else:
            verdict = "inconclusive"
        rows.append({
            "K": K, "kind": kind, "worst_estimate": est.estimate, "worst_hits": worst,
            "worst_upper_conf": est.upper_conf, "bound": bound, "pass": verdict,
            "budget_limited": est.budget_limited, "geometries": int(col.size),
            "h_count": grids.h_count, "eta_count": grids.eta_count, "h0_count": grids.h0_count,
            "seed": sampler.seed,
        })
    usable = [r for r in rows if not r["budget_limited"] and 0 < r["worst_hits"] < n]
    alpha = fit_decay([r["K"] for r in usable], [r["worst_estimate"] for r in usable])
    return DecayTable(kind, rows, alpha, c1, "min" if pair is None else f"{pair[0]}-{pair[1]}",
                      grids, sampler.seed, n)


__all__ = [
    "CartanQuery", "Sampler", "SublevelMeasureEstimate", "ConditionCheck", "SweepGrids",
    "DecayTable", "g_det", "estimate_sublevel_measure", "check_condition", "cartan_sweep",
    "clopper_pearson_upper", "clopper_pearson_lower", "clopper_pearson_interval", "quadrature_measure",
    "fit_decay", "direction_grid", "shift_grid",
]
