"""Real trigonometric polynomials on the torus T^d.

A potential of degree ``n`` on ``T^d`` is stored as a real coefficient vector
of length ``N = #{m in Z^d : |m|_1 <= n}`` over the real basis

    1,  cos(2 pi m.x),  sin(2 pi m.x)

where ``m`` runs over one representative of every pair ``{m, -m}`` (the
representative has its first nonzero entry positive).  The ordering of that
basis is fixed by :func:`index_table`.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import comb
import json
from typing import NamedTuple

import numpy as np

from . import kernels

INT64_MAX = 2**63 - 1


class ConstantPotentialError(ValueError):
    """Raised where a nonconstant potential is required."""


class CoefficientFileError(ValueError):
    """Malformed coefficient file; the message names the line or field."""


def dimension_count(d, n):
    """Number of lattice points ``m in Z^d`` with ``sum |m_j| <= n``.

    Uses the closed form ``N = sum_k a_{d,k}`` with
    ``a_{d,k} = sum_{l=1}^{min(d,k)} C(d,l) 2^l C(k-1,l-1)`` and ``a_{d,0} = 1``.

    Raises
    ------
    ValueError
        If ``d < 1`` or ``n < 0``.
    OverflowError
        If the count does not fit a signed 64-bit integer.
    """
    if isinstance(d, bool) or isinstance(n, bool) or int(d) != d or int(n) != n:
        raise ValueError("d and n must be integers")
    d, n = int(d), int(n)
    if d < 1:
        raise ValueError(f"torus dimension must be >= 1, got {d}")
    if n < 0:
        raise ValueError(f"degree must be >= 0, got {n}")
    total = 1
    for k in range(1, n + 1):
        total += sum(comb(d, l) * 2**l * comb(k - 1, l - 1) for l in range(1, min(d, k) + 1))
        if total > INT64_MAX:
            raise OverflowError(f"dimension count for d={d}, n={n} exceeds int64")
    return total


@dataclass(frozen=True)
class PotentialShape:
    d: int
    n: int

    def __post_init__(self):
        # validates and caches nothing; N is cheap
        dimension_count(self.d, self.n)

    @property
    def N(self):
        return dimension_count(self.d, self.n)


class BasisLabel(NamedTuple):
    kind: str  # "const", "cos" or "sin"
    m: tuple

    def __str__(self):
        if self.kind == "const":
            return "const"
        return f"{self.kind}{self.m}"


def l1_ball(d, n):
    """All ``m in Z^d`` with ``|m|_1 <= n`` (unordered)."""
    if d == 1:
        return [(k,) for k in range(-n, n + 1)]
    out = []
    for first in range(-n, n + 1):
        for rest in l1_ball(d - 1, n - abs(first)):
            out.append((first,) + rest)
    return out


def _is_representative(m):
    for v in m:
        if v != 0:
            return v > 0
    return False


@lru_cache(maxsize=None)
def _representatives(d, n):
    reps = [m for m in l1_ball(d, n) if _is_representative(m)]
    reps.sort(key=lambda m: (sum(abs(v) for v in m), m))
    return tuple(reps)


def index_table(shape):
    """Canonical basis ordering: const, then cos(m), sin(m) per representative.

    Representatives are sorted by ``(|m|_1, entries)``.
    """
    labels = [BasisLabel("const", (0,) * shape.d)]
    for m in _representatives(shape.d, shape.n):
        labels.append(BasisLabel("cos", m))
        labels.append(BasisLabel("sin", m))
    return labels


def wrap(x):
    """Reduce coordinates into [0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    y = x - np.floor(x)
    # x slightly below an integer can round to exactly 1.0
    return np.where(y >= 1.0, 0.0, y)


def torus_delta(x, y):
    """Componentwise signed difference ``x - y`` reduced to [-1/2, 1/2)."""
    t = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return t - np.floor(t + 0.5)


def torus_distance(x, y):
    """Quotient (Euclidean) distance on T^d."""
    return np.linalg.norm(torus_delta(x, y), axis=-1)


def torus_norm(h):
    return torus_distance(h, np.zeros_like(np.asarray(h, dtype=np.float64)))


class TrigPolynomial:
    """Evaluable real trigonometric polynomial ``V(x; c)``.

    Parameters
    ----------
    shape : PotentialShape
    coefficients : array_like, length ``shape.N``
        Values in :func:`index_table` order.
    """

    def __init__(self, shape, coefficients):
        c = np.array(coefficients, dtype=np.float64).reshape(-1)
        if c.shape[0] != shape.N:
            raise ValueError(f"expected {shape.N} coefficients for {shape}, got {c.shape[0]}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        self.shape = shape
        self.coefficients = c
        reps = _representatives(shape.d, shape.n)
        self.freqs = np.array(reps, dtype=np.int64).reshape(len(reps), shape.d)
        self.const = float(c[0])
        self.cos_coef = np.ascontiguousarray(c[1::2])
        self.sin_coef = np.ascontiguousarray(c[2::2])

    @classmethod
    def from_terms(cls, d, n, const=0.0, cos=None, sin=None):
        """Build from ``{m: amplitude}`` maps; ``m`` need not be a representative."""
        shape = PotentialShape(d, n)
        pos = {lab: i for i, lab in enumerate(index_table(shape))}
        c = np.zeros(shape.N)
        c[0] = const
        for kind, terms in (("cos", cos or {}), ("sin", sin or {})):
            for m, amp in terms.items():
                m = tuple(int(v) for v in np.atleast_1d(m))
                if len(m) != d:
                    raise ValueError(f"frequency {m} does not have {d} entries")
                sign = 1.0
                if not _is_representative(m):
                    if not any(m):
                        raise ValueError("use const= for the zero frequency")
                    m = tuple(-v for v in m)
                    sign = -1.0 if kind == "sin" else 1.0
                key = BasisLabel(kind, m)
                if key not in pos:
                    raise ValueError(f"frequency {m} exceeds degree {n}")
                c[pos[key]] += sign * amp
        return cls(shape, c)

    @property
    def d(self):
        return self.shape.d

    @property
    def l1_norm(self):
        return float(np.abs(self.coefficients).sum())

    @property
    def is_constant(self):
        return not np.any(self.coefficients[1:])

    def jets(self, X, order=2):
        """Batched value, gradient and Hessian at points ``X`` of shape (P, d).

        Entries above ``order`` come back as empty arrays.
        """
        X = np.ascontiguousarray(wrap(np.atleast_2d(X)).reshape(-1, self.d))
        return kernels.trig_jets(self.freqs, self.cos_coef, self.sin_coef, self.const, X, int(order))

    def evaluate_jet(self, x, order=2):
        """Value, gradient and Hessian at one point; absent orders are None."""
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        val, grad, hess = self.jets(np.asarray(x, dtype=np.float64).reshape(1, self.d), order)
        return (
            float(val[0]),
            grad[0].copy() if order >= 1 else None,
            hess[0].copy() if order >= 2 else None,
        )

    def __call__(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1 and self.d > 1 or X.ndim == 0
        vals = self.jets(X.reshape(-1, self.d), 0)[0]
        if single:
            return float(vals[0])
        return vals

    def shifted(self, t):
        """The potential ``x -> V(x + t)``."""
        phi = 2.0 * np.pi * (self.freqs @ np.asarray(t, dtype=np.float64).reshape(self.d))
        a, b = self.cos_coef, self.sin_coef
        c = np.empty_like(self.coefficients)
        c[0] = self.const
        c[1::2] = a * np.cos(phi) + b * np.sin(phi)
        c[2::2] = b * np.cos(phi) - a * np.sin(phi)
        return TrigPolynomial(self.shape, c)

    def __repr__(self):
        return f"TrigPolynomial(d={self.d}, n={self.shape.n}, N={self.shape.N})"


def dumps_coefficients(V):
    body = ", ".join(f"{v:.17g}" for v in V.coefficients)
    return f'{{"d": {V.shape.d}, "n": {V.shape.n}, "coefficients": [{body}]}}\n'


def save_coefficients(V, path):
    with open(path, "w") as fh:
        fh.write(dumps_coefficients(V))


def loads_coefficients(text):
    """Parse the coefficient file format into a :class:`TrigPolynomial`."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CoefficientFileError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise CoefficientFileError("top level must be a JSON object")
    for key in ("d", "n", "coefficients"):
        if key not in obj:
            raise CoefficientFileError(f"missing field {key!r}")
    d, n, coeffs = obj["d"], obj["n"], obj["coefficients"]
    for key, val in (("d", d), ("n", n)):
        if not isinstance(val, int) or isinstance(val, bool):
            raise CoefficientFileError(f"field {key!r} must be an integer")
    try:
        shape = PotentialShape(d, n)
    except (ValueError, OverflowError) as exc:
        raise CoefficientFileError(f"fields 'd'/'n': {exc}") from None
    if not isinstance(coeffs, list):
        raise CoefficientFileError("field 'coefficients' must be a list")
    if len(coeffs) != shape.N:
        raise CoefficientFileError(
            f"field 'coefficients': expected {shape.N} values for d={d}, n={n}, got {len(coeffs)}")
    for i, v in enumerate(coeffs):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
            raise CoefficientFileError(f"field 'coefficients[{i}]': not a finite number")
    return TrigPolynomial(shape, coeffs)


def load_coefficients(path):
    with open(path) as fh:
        return loads_coefficients(fh.read())
