"""Randomized genericity surveys over coefficient space.

Each sample draws a coefficient vector from a seeded distribution and is
classified against the four conditions (Morse, unique extrema, and the two
Cartan sublevel estimates).  Line slices classify a straight path between two
coefficient vectors and bisect around every failure.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import datetime as _dt
import hashlib
import io
import math

import numpy as np

from . import __version__
from .cartan import CONDITION3, CONDITION4, Sampler, SweepGrids, cartan_sweep
from .morse import MorseOptions, find_critical_points, verify_morse, verify_unique_extrema
from .potential import PotentialShape, TrigPolynomial, dumps_coefficients
from .rng import Xoshiro256pp, sample_seed
from . import spectrum as _spec

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
NOT_APPLICABLE, NOT_RUN = "not_applicable", "not_run"

CSV_COLUMNS = ("sample_id", "seed", "is_morse", "n_critical", "min_abs_hess_det", "unique_min",
               "unique_max", "extrema_gap", "cartan3_verdict", "cartan4_verdict", "in_class_G",
               "error")


@dataclass(frozen=True)
class Distribution:
    kind: str = "gaussian"  # "gaussian" (scale = sigma) or "uniform_ball" (scale = R)
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform_ball"):
            raise ValueError(f"unknown distribution {self.kind!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("distribution scale must be positive")


def sample_coefficients(shape, distribution, seed):
    """Coefficient vector drawn from ``distribution`` by the stream ``seed``."""
    gen = Xoshiro256pp(seed)
    N = shape.N
    z = gen.normals(N)
    if distribution.kind == "gaussian":
        return TrigPolynomial(shape, distribution.scale * z)
    r = distribution.scale * gen.random() ** (1.0 / N)
    nz = np.linalg.norm(z)
    return TrigPolynomial(shape, r * z / nz if nz > 0 else np.zeros(N))


def combine(verdicts):
    """Tri-state conjunction; ``not_applicable`` entries are neutral and
    ``not_run`` ones keep the result short of ``pass``."""
    vs = [v for v in verdicts if v != NOT_APPLICABLE]
    if any(v == FAIL for v in vs):
        return FAIL
    if all(v == PASS for v in vs):
        return PASS
    return INCONCLUSIVE


@dataclass(frozen=True)
class ClassifyOptions:
    morse: MorseOptions = field(default_factory=MorseOptions)
    cartan: bool = True
    K_list: tuple = tuple(range(2, 11))
    c1: float = 0.3
    grids: SweepGrids = field(default_factory=SweepGrids)
    samples: int = 100_000
    seed: int = 0


@dataclass
class GReport:
    coefficient_ref: str
    d: int
    n: int
    N: int
    morse: dict
    extrema: dict
    cartan3: dict
    cartan4: dict
    conditions: dict
    in_class_G: str
    reasons: list

    def to_dict(self):
        return asdict(self)


def _sweep_summary(table):
    out = table.counts()
    out.update(verdict=table.verdict, alpha=table.alpha, pair_mode=table.pair_mode,
               c1=table.c1, samples=table.samples, seed=table.seed)
    return out


def _skipped(reason):
    return {"pass": 0, "fail": 0, "inconclusive": 0, "verdict": NOT_APPLICABLE, "reason": reason}


def classify_potential(V, opts=None):
    """Tri-state verdict on all four conditions for the potential ``V``."""
    opts = opts or ClassifyOptions()
    ref = hashlib.sha256(dumps_coefficients(V).encode()).hexdigest()
    base = dict(coefficient_ref=ref, d=V.shape.d, n=V.shape.n, N=V.shape.N)
    if V.is_constant:
        why = "constant potential: every point is critical"
        cond = {k: FAIL for k in ("morse", "extrema", "cartan3", "cartan4")}
        return GReport(**base, morse={"verdict": FAIL}, extrema={"verdict": FAIL},
                       cartan3=_skipped(why) | {"verdict": FAIL},
                       cartan4=_skipped(why) | {"verdict": FAIL},
                       conditions=cond, in_class_G=FAIL, reasons=[why])

    reasons = []
    mr = verify_morse(V, opts.morse)
    if any(p.degenerate for p in mr.critical_points):
        v_morse = FAIL
        reasons.append("degenerate critical point")
    elif not mr.critical_points:
        v_morse = INCONCLUSIVE
        reasons.append("no critical point converged")
    elif not mr.search_exhaustive:
        v_morse = INCONCLUSIVE
        reasons.append("critical point search failed the Euler/Morse-count check")
    else:
        v_morse = PASS
    morse = {"verdict": v_morse, "is_morse": mr.is_morse, "n_critical": len(mr.critical_points),
             "min_abs_hessian_det": mr.min_abs_hessian_det, "euler_sum": mr.euler_sum,
             "search_exhaustive": mr.search_exhaustive, "degeneracy_tol": mr.degeneracy_tol,
             "grid_per_axis": mr.grid_per_axis}

    if len(mr.critical_points) >= 2:
        er = verify_unique_extrema(V, opts.morse, points=mr.critical_points)
        v_ext = PASS if er.unique_min and er.unique_max else FAIL
        if v_ext == FAIL:
            reasons.append("global extremum is not unique")
        extrema = {"verdict": v_ext, "unique_min": er.unique_min, "unique_max": er.unique_max,
                   "min_separation": er.min_separation, "max_separation": er.max_separation,
                   "extremum_gap_tol": er.extremum_gap_tol}
    else:
        extrema = {"verdict": INCONCLUSIVE, "unique_min": None, "unique_max": None,
                   "min_separation": None, "max_separation": None}
        reasons.append("fewer than 2 critical points found")

    if opts.cartan:
        sampler = Sampler(opts.samples, opts.seed)
        if V.d >= 2:
            t3 = cartan_sweep(V, CONDITION3, opts.K_list, opts.grids, sampler, opts.c1)
            cartan3 = _sweep_summary(t3)
        else:
            cartan3 = _skipped("condition3 needs d >= 2")
        vals = [p.value for p in mr.critical_points]
        eta_range = (min(vals), max(vals)) if vals else None
        t4 = cartan_sweep(V, CONDITION4, opts.K_list, opts.grids, sampler, opts.c1,
                          eta_range=eta_range, morse_opts=opts.morse)
        cartan4 = _sweep_summary(t4)
        for name, s in (("condition3", cartan3), ("condition4", cartan4)):
            if s["verdict"] == FAIL:
                reasons.append(f"{name} sublevel bound violated")
    else:
        cartan3 = _skipped("cartan checks disabled") | {"verdict": NOT_RUN}
        cartan4 = _skipped("cartan checks disabled") | {"verdict": NOT_RUN}

    cond = {"morse": v_morse, "extrema": extrema["verdict"],
            "cartan3": cartan3["verdict"], "cartan4": cartan4["verdict"]}
    return GReport(**base, morse=morse, extrema=extrema, cartan3=cartan3, cartan4=cartan4,
                   conditions=cond, in_class_G=combine(cond.values()), reasons=reasons)


@dataclass(frozen=True)
class SpectrumOptions:
    lam: float
    omega: tuple
    L: int = 500
    phases: int = 10
    resolution: float = None


@dataclass(frozen=True)
class SurveyConfig:
    shape: PotentialShape
    distribution: Distribution = field(default_factory=Distribution)
    sample_count: int = 100
    master_seed: int = 0
    classify: ClassifyOptions = field(default_factory=ClassifyOptions)
    spectrum: SpectrumOptions = None

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    def to_dict(self):
        out = asdict(self)
        out["shape"]["N"] = self.shape.N
        return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _survey_row(cfg, i):
    seed = sample_seed(cfg.master_seed, i)
    row = dict.fromkeys(CSV_COLUMNS, None)
    row.update(sample_id=i, seed=seed)
    try:
        V = sample_coefficients(cfg.shape, cfg.distribution, seed)
        copts = cfg.classify
        copts = ClassifyOptions(copts.morse, copts.cartan, copts.K_list, copts.c1, copts.grids,
                                copts.samples, seed)
        rep = classify_potential(V, copts)
        m, e = rep.morse, rep.extrema
        row.update(
            is_morse=m.get("is_morse"), n_critical=m.get("n_critical"),
            min_abs_hess_det=m.get("min_abs_hessian_det"), unique_min=e.get("unique_min"),
            unique_max=e.get("unique_max"),
            extrema_gap=None if e.get("min_separation") is None
            else min(e["min_separation"], e["max_separation"]),
            cartan3_verdict=rep.cartan3["verdict"], cartan4_verdict=rep.cartan4["verdict"],
            in_class_G=rep.in_class_G)
        row["_conditions"] = rep.conditions
        if cfg.spectrum is not None:
            s = cfg.spectrum
            op = _spec.OperatorConfig(V, s.omega, s.lam)
            est = _spec.analyze_gaps(_spec.approximate_spectrum(op, s.L, s.phases, seed),
                                     s.resolution)
            row["spectrum_is_interval"] = est.is_interval
    except Exception as exc:  # recorded per row; the survey carries on
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


@dataclass
class SurveyResult:
    rows: list
    counts: dict
    condition_failures: dict
    fraction_pass: float
    fraction_fail: float
    errors: int
    manifest: dict

    @property
    def columns(self):
        extra = ("spectrum_is_interval",) if any("spectrum_is_interval" in r for r in self.rows) else ()
        return CSV_COLUMNS + extra

    def csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r.get(c)) for c in self.columns])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())

    def summary(self):
        return {"counts": self.counts, "condition_failures": self.condition_failures,
                "fraction_pass": self.fraction_pass, "fraction_fail": self.fraction_fail,
                "errors": self.errors}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def run_survey(cfg, threads=1):
    """Classify ``cfg.sample_count`` seeded samples.

    Sample ``i`` uses seed ``splitmix64(master_seed ^ i)`` for both its
    coefficients and its Monte-Carlo points, so output does not depend on
    ``threads``.
    """
    start = _now()
    task = lambda i: _survey_row(cfg, i)  # noqa: E731
    ids = range(cfg.sample_count)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(task, ids))
        rows.sort(key=lambda r: r["sample_id"])
    else:
        rows = [task(i) for i in ids]

    counts = {PASS: 0, FAIL: 0, INCONCLUSIVE: 0, "error": 0}
    cond_fail = {"morse": 0, "extrema": 0, "cartan3": 0, "cartan4": 0}
    for r in rows:
        if r["error"]:
            counts["error"] += 1
            continue
        counts[r["in_class_G"]] += 1
        for k, v in r.pop("_conditions").items():
            cond_fail[k] += v == FAIL
    n = cfg.sample_count
    manifest = {"command": "survey", "config": cfg.to_dict(), "master_seed": cfg.master_seed,
                "tool_version": __version__, "start": start, "end": _now()}
    return SurveyResult(rows, counts, cond_fail, counts[PASS] / n, counts[FAIL] / n,
                        counts["error"], manifest)


# --- line slices -----------------------------------------------------------

def morse_extrema_verdict(V, opts=None):
    """True when ``V`` fails condition (i) or (ii)."""
    if V.is_constant:
        return True
    res = find_critical_points(V, opts)
    if any(p.degenerate for p in res.points):
        return True
    if len(res.points) < 2:
        return True
    er = verify_unique_extrema(V, opts, points=res.points)
    return not (er.unique_min and er.unique_max)


@dataclass
class SliceResult:
    t: np.ndarray
    failing: np.ndarray  # bool per grid point
    failing_parameters: list
    refined: list  # [(lo, hi)] enclosing each failing run
    brackets: list  # [(t_pass, t_fail)] boundary brackets, width <= tol
    steps: int

    @property
    def failing_fraction(self):
        return float(self.failing.sum()) / (self.steps + 1)

    def to_dict(self):
        return {"steps": self.steps, "failing_parameters": self.failing_parameters,
                "refined": [list(r) for r in self.refined],
                "brackets": [list(b) for b in self.brackets],
                "failing_fraction": self.failing_fraction}


def line_slice(c_start, c_end, steps, opts=None, tol=1e-6):
    """Classify ``c(t) = (1-t) c_start + t c_end`` on ``t = k/steps`` for (i)-(ii).

    For each maximal run of failing grid points, the pass/fail transitions on
    both sides are bisected until the bracket is at most ``tol`` wide.
    """
    if steps < 10:
        raise ValueError("steps must be >= 10")
    if c_start.shape != c_end.shape:
        raise ValueError("endpoints must share a shape")
    a = c_start.coefficients
    b = c_end.coefficients
    shape = c_start.shape

    def fails(t):
        return morse_extrema_verdict(TrigPolynomial(shape, (1.0 - t) * a + t * b), opts)

    t = np.arange(steps + 1) / steps
    failing = np.array([fails(tk) for tk in t])

    def bisect(good, bad):
        while abs(bad - good) > tol:
            mid = 0.5 * (good + bad)
            if fails(mid):
                bad = mid
            else:
                good = mid
        return good, bad

    refined, brackets = [], []
    k = 0
    while k <= steps:
        if not failing[k]:
            k += 1
            continue
        j = k
        while j < steps and failing[j + 1]:
            j += 1
        lo, hi = t[k], t[j]
        if k > 0:
            br = bisect(t[k - 1], t[k])
            brackets.append(br)
            lo = br[1]
        if j < steps:
            br = bisect(t[j + 1], t[j])
            brackets.append(br)
            hi = br[1]
        refined.append((float(lo), float(hi)))
        k = j + 1
    return SliceResult(t, failing, [float(v) for v in t[failing]], refined,
                       [(float(g), float(f)) for g, f in brackets], steps)


__all__ = [
    "Distribution", "sample_coefficients", "ClassifyOptions", "GReport", "classify_potential",
    "SpectrumOptions", "SurveyConfig", "SurveyResult", "run_survey", "line_slice",
    "SliceResult", "morse_extrema_verdict", "combine", "CSV_COLUMNS",
]
