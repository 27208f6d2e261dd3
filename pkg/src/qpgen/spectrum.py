"""Finite-volume spectra of ``(H psi)(n) = -psi(n+1) - psi(n-1) + lam V(x + n omega) psi(n)``.

The operator is truncated to ``{0, ..., L-1}`` with Dirichlet boundary
conditions, giving a symmetric tridiagonal matrix whose eigenvalues are
computed by Sturm-sequence bisection.  Spectra are pooled over random phases
and scanned for gaps.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
import csv
import json
import math

import numpy as np

from . import kernels
from .potential import wrap
from .rng import Xoshiro256pp


@lru_cache(maxsize=8)
def _l1_shell_array(d, M):
    """Integer vectors with ``0 < |m|_1 <= M`` whose first nonzero entry is positive."""
    def ball(k, r):
        if k == 1:
            return np.arange(-r, r + 1, dtype=np.int64)[:, None]
        parts = [np.hstack([np.full((len(b), 1), f, dtype=np.int64), b])
                 for f in range(-r, r + 1) for b in (ball(k - 1, r - abs(f)),)]
        return np.vstack(parts)

    m = ball(d, M)
    nz = m != 0
    first = m[np.arange(len(m)), np.argmax(nz, axis=1)]
    keep = nz.any(axis=1) & (first > 0)
    return m[keep]


@dataclass
class DiophantineResult:
    passed: bool
    worst_m: tuple
    worst_value: float  # ||m . omega|| for the worst offender
    worst_ratio: float  # ||m . omega|| * |m|^tau; the check needs >= c
    c: float
    tau: float
    M: int


def diophantine_check(omega, c=0.05, tau=None, M=100):
    """Finite Diophantine test ``||m . omega|| >= c / |m|^tau`` for ``0 < |m|_1 <= M``.

    ``||.||`` is the distance to the nearest integer; ``tau`` defaults to
    ``d + 1``.  The offender minimizing ``||m . omega|| |m|^tau`` is reported.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=np.float64))
    d = omega.shape[0]
    if M < 1:
        raise ValueError("M must be >= 1")
    tau = float(d + 1 if tau is None else tau)
    m = _l1_shell_array(d, int(M))
    t = m @ omega
    dist = np.abs(t - np.round(t))
    ratio = dist * np.abs(m).sum(axis=1).astype(np.float64) ** tau
    k = int(np.argmin(ratio))
    return DiophantineResult(
        passed=bool(ratio[k] >= c), worst_m=tuple(int(v) for v in m[k]),
        worst_value=float(dist[k]), worst_ratio=float(ratio[k]), c=float(c), tau=tau, M=int(M))


class DiophantineError(ValueError):
    pass


@dataclass
class OperatorConfig:
    V: object
    omega: np.ndarray
    lam: float
    x0: np.ndarray = None
    require_diophantine: bool = True
    dio_c: float = 0.05
    dio_tau: float = None
    dio_M: int = 100

    def __post_init__(self):
        d = self.V.d
        self.omega = np.atleast_1d(np.asarray(self.omega, dtype=np.float64))
        if self.omega.shape != (d,):
            raise ValueError(f"omega must have {d} entries")
        if not np.all((self.omega > 0) & (self.omega < 1)):
            raise ValueError("omega entries must lie in (0, 1)")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError("coupling must be finite and >= 0")
        self.x0 = wrap(np.zeros(d) if self.x0 is None else np.asarray(self.x0, dtype=np.float64))
        if self.require_diophantine:
            res = diophantine_check(self.omega, self.dio_c, self.dio_tau, self.dio_M)
            if not res.passed:
                raise DiophantineError(
                    f"omega fails the Diophantine check at m={res.worst_m} "
                    f"(||m.omega||={res.worst_value:.3g})")


@dataclass
class Tridiagonal:
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        self.diag = np.ascontiguousarray(self.diag, dtype=np.float64)
        self.offdiag = np.ascontiguousarray(self.offdiag, dtype=np.float64)
        if self.offdiag.shape[0] != max(self.diag.shape[0] - 1, 0):
            raise ValueError("offdiag must have len(diag) - 1 entries")

    @property
    def trace(self):
        return float(self.diag.sum())

    def dense(self):
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


def build_truncation(cfg, L, x0=None):
    """Dirichlet truncation of the operator to sites ``0..L-1``."""
    if L < 2:
        raise ValueError("truncation size must be >= 2")
    base = cfg.x0 if x0 is None else np.asarray(x0, dtype=np.float64)
    pts = wrap(base[None, :] + np.arange(L)[:, None] * cfg.omega[None, :])
    diag = cfg.lam * cfg.V(pts) if cfg.lam != 0 else np.zeros(L)
    return Tridiagonal(np.asarray(diag, dtype=np.float64).reshape(L), -np.ones(L - 1))


def _bisection_setup(T, rtol=1e-12):
    d, e = T.diag, T.offdiag
    n = d.shape[0]
    e2 = e * e
    r = np.zeros(n)
    r[:-1] += np.abs(e)
    r[1:] += np.abs(e)
    gl = float(np.min(d - r))
    gu = float(np.max(d + r))
    eps = np.finfo(np.float64).eps
    pivmin = np.finfo(np.float64).tiny * max(1.0, float(e2.max()) if n > 1 else 1.0)
    scale = max(abs(gl), abs(gu), 1e-300)
    pad = 2.0 * eps * scale * n + 4.0 * pivmin
    gl -= pad
    gu += pad
    norm = float(np.abs(d).max()) + 2.0 * (float(np.abs(e).max()) if n > 1 else 0.0)
    tol = max(rtol * norm, 2.0 * eps * scale)
    niter = int(math.ceil(math.log2(max((gu - gl) / tol, 2.0)))) + 1
    return e2, gl, gu, pivmin, niter


def eigenvalues_tridiagonal(T, rtol=1e-12):
    """All eigenvalues of a symmetric tridiagonal matrix, ascending.

    Sturm-sequence bisection from Gershgorin brackets.  Each bracket is halved
    until its width is below ``rtol * (max|diag| + 2 max|offdiag|)`` (never
    below two ulps of the spectral radius).
    """
    n = T.diag.shape[0]
    if n == 1:
        return T.diag.copy()
    e2, gl, gu, pivmin, niter = _bisection_setup(T, rtol)
    ev = kernels.bisect_eigenvalues(T.diag, e2, gl, gu, pivmin, niter)
    return np.sort(ev)


def sturm_count(T, x):
    """Number of eigenvalues of ``T`` strictly below ``x``."""
    _, _, _, pivmin, _ = _bisection_setup(T)
    return int(kernels.sturm_count(T.diag, T.offdiag, float(x), pivmin))


@dataclass
class SpectrumEstimate:
    eigenvalues: np.ndarray
    L: int
    phases: int
    per_phase: list = field(repr=False, default_factory=list)
    phase_points: np.ndarray = field(repr=False, default=None)
    gaps: list = field(default_factory=list)
    is_interval: bool = None
    resolution: float = None
    boundary_filter: str = None

    @property
    def width(self):
        return float(self.eigenvalues[-1] - self.eigenvalues[0])


def draw_phases(d, num_phases, seed):
    gen = Xoshiro256pp(seed)
    return gen.uniforms(d * num_phases).reshape(num_phases, d)


def approximate_spectrum(cfg, L, num_phases=20, seed=0, mode="phases", threads=1):
    """Pool truncated spectra.

    ``mode="phases"`` unions ``num_phases`` truncations of size ``L`` at
    uniformly drawn base points; ``mode="orbit"`` uses one truncation of size
    ``L * num_phases`` started at ``cfg.x0``.  ``threads`` only changes speed.
    """
    if num_phases < 1:
        raise ValueError("num_phases must be >= 1")
    if mode == "phases":
        pts = draw_phases(cfg.V.d, num_phases, seed)
        solve = lambda x0: eigenvalues_tridiagonal(build_truncation(cfg, L, x0))  # noqa: E731
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                per = list(pool.map(solve, pts))
        else:
            per = [solve(x0) for x0 in pts]
    elif mode == "orbit":
        pts = cfg.x0[None, :]
        per = [eigenvalues_tridiagonal(build_truncation(cfg, L * num_phases))]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    ev = np.sort(np.concatenate(per))
    return SpectrumEstimate(ev, L, num_phases, per, pts)


def detect_gaps(eigs, resolution):
    """Gaps ``(e_k, e_{k+1})`` of a sorted point set wider than ``resolution``.

    Returns ``(gaps, is_interval)`` with each gap as ``(left, right, width)``.
    """
    eigs = np.asarray(eigs, dtype=np.float64)
    if eigs.shape[0] < 2:
        raise ValueError("need at least 2 eigenvalues")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    diffs = np.diff(eigs)
    idx = np.flatnonzero(diffs > resolution)
    gaps = [(float(eigs[k]), float(eigs[k + 1]), float(diffs[k])) for k in idx]
    return gaps, not gaps


def phase_consensus(per_phase, resolution, radius=None, quorum=0.5):
    """Drop eigenvalues not confirmed by a quorum of phases.

    Dirichlet truncation places a few boundary states inside true gaps, at
    energies that depend on the phase.  A phase *covers* an energy ``E`` if it
    has an eigenvalue within ``radius`` of ``E`` or two consecutive
    eigenvalues at most ``resolution`` apart that enclose ``E``.  A pooled
    eigenvalue is kept when at least ``quorum`` of the phases cover it.
    ``radius`` defaults to ``resolution / 10``.
    """
    radius = resolution / 10.0 if radius is None else radius
    allv = np.sort(np.concatenate(per_phase))
    support = np.zeros(allv.shape[0], dtype=np.int64)
    for s in per_phase:
        i = np.searchsorted(s, allv)
        lo = s[np.clip(i - 1, 0, len(s) - 1)]
        hi = s[np.clip(i, 0, len(s) - 1)]
        near = np.minimum(np.abs(allv - lo), np.abs(allv - hi)) <= radius
        enclosed = (lo <= allv) & (allv <= hi) & (hi - lo <= resolution)
        support += near | enclosed
    return allv[support >= quorum * len(per_phase)]


def default_resolution(est, floor=0.0):
    return max(10.0 * est.width / est.L, floor)


def analyze_gaps(est, resolution=None, boundary_filter="consensus", quorum=0.5, floor=0.0):
    """Fill ``est.gaps`` / ``est.is_interval``; returns ``est``.

    ``boundary_filter="none"`` scans the raw pooled spectrum.
    """
    res = default_resolution(est, floor) if resolution is None else float(resolution)
    if boundary_filter == "consensus" and len(est.per_phase) > 1:
        pts = phase_consensus(est.per_phase, res, quorum=quorum)
    elif boundary_filter in ("none", "consensus"):
        pts = est.eigenvalues
    else:
        raise ValueError(f"unknown boundary filter {boundary_filter!r}")
    est.gaps, est.is_interval = detect_gaps(pts, res)
    est.resolution = res
    est.boundary_filter = boundary_filter
    return est


def gap_report(est, cfg):
    return {
        "gaps": [{"left": l, "right": r, "width": w} for l, r, w in est.gaps],
        "is_interval": bool(est.is_interval),
        "L": est.L,
        "phases": est.phases,
        "resolution": est.resolution,
        "boundary_filter": est.boundary_filter,
        "lambda": cfg.lam,
        "omega": [float(v) for v in cfg.omega],
    }


def write_spectrum_csv(est, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phase_index", "eigenvalue_index", "eigenvalue"])
        for p, ev in enumerate(est.per_phase):
            for k, e in enumerate(ev):
                w.writerow([p, k, repr(float(e))])


def write_gap_report(est, cfg, path):
    with open(path, "w") as fh:
        json.dump(gap_report(est, cfg), fh, indent=2)
        fh.write("\n")
