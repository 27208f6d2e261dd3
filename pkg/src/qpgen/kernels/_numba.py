"""numba-compiled kernels.  Signatures mirror :mod:`qpgen.kernels._numpy`."""
import numpy as np
from numba import njit

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S11 = np.uint64(11)
_S17 = np.uint64(17)
_S23 = np.uint64(23)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S41 = np.uint64(41)
_S45 = np.uint64(45)
_S19 = np.uint64(19)
_TWO_M53 = 2.0 ** -53
_TWO_PI = 2.0 * np.pi


@njit(cache=True, inline="always")
def _mix(x):
    z = x + _GAMMA
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def xoshiro_uniform(seeds, count):
    m = seeds.shape[0]
    out = np.empty((m, count), dtype=np.float64)
    for j in range(m):
        x = seeds[j]
        s0 = _mix(x)
        x = x + _GAMMA
        s1 = _mix(x)
        x = x + _GAMMA
        s2 = _mix(x)
        x = x + _GAMMA
        s3 = _mix(x)
        for i in range(count):
            t0 = s0 + s3
            result = ((t0 << _S23) | (t0 >> _S41)) + s0
            t = s1 << _S17
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = (s3 << _S45) | (s3 >> _S19)
            out[j, i] = float(result >> _S11) * _TWO_M53
    return out


@njit(cache=True, nogil=True)
def trig_jets(freqs, cos_c, sin_c, const, X, order):
    P, d = X.shape
    R = freqs.shape[0]
    val = np.full(P, const)
    grad = np.zeros((P if order >= 1 else 0, d))
    hess = np.zeros((P if order >= 2 else 0, d, d))
    for p in range(P):
        for r in range(R):
            t = 0.0
            for j in range(d):
                t += freqs[r, j] * X[p, j]
            t -= np.floor(t + 0.5)
            th = _TWO_PI * t
            c = np.cos(th)
            s = np.sin(th)
            a = cos_c[r]
            b = sin_c[r]
            val[p] += a * c + b * s
            if order >= 1:
                w1 = _TWO_PI * (b * c - a * s)
                for j in range(d):
                    grad[p, j] += w1 * freqs[r, j]
                if order >= 2:
                    w2 = -_TWO_PI * _TWO_PI * (a * c + b * s)
                    for i in range(d):
                        for j in range(i, d):
                            hess[p, i, j] += w2 * freqs[r, i] * freqs[r, j]
        if order >= 2:
            for i in range(d):
                for j in range(i):
                    hess[p, i, j] = hess[p, j, i]
    return val, grad, hess


@njit(cache=True, nogil=True, error_model="numpy")
def sturm_count(diag, off, x, pivmin):
    n = diag.shape[0]
    q = diag[0] - x
    if abs(q) < pivmin:
        q = -pivmin
    cnt = 1 if q < 0.0 else 0
    for i in range(1, n):
        q = diag[i] - x - off[i - 1] * off[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            cnt += 1
    return cnt


_BLOCK = 16


@njit(cache=True, nogil=True, error_model="numpy")
def bisect_eigenvalues(diag, e2, gl, gu, pivmin, niter):
    """All eigenvalues by bisection; shifts advanced in blocks for ILP."""
    n = diag.shape[0]
    out = np.empty(n)
    lo = np.empty(_BLOCK)
    hi = np.empty(_BLOCK)
    mid = np.empty(_BLOCK)
    q = np.empty(_BLOCK)
    cnt = np.empty(_BLOCK, dtype=np.int64)
    for k0 in range(0, n, _BLOCK):
        nb = min(_BLOCK, n - k0)
        for b in range(_BLOCK):
            # padding lanes repeat the last index and are discarded
            lo[b] = gl
            hi[b] = gu
        for _ in range(niter):
            d0 = diag[0]
            for b in range(_BLOCK):
                mid[b] = 0.5 * (lo[b] + hi[b])
                qb = d0 - mid[b]
                qb = qb if abs(qb) >= pivmin else -pivmin
                q[b] = qb
                cnt[b] = qb < 0.0
            for i in range(1, n):
                di = diag[i]
                ei = e2[i - 1]
                for b in range(_BLOCK):
                    qb = di - mid[b] - ei / q[b]
                    qb = qb if abs(qb) >= pivmin else -pivmin
                    q[b] = qb
                    cnt[b] += qb < 0.0
            for b in range(_BLOCK):
                if cnt[b] > min(k0 + b, n - 1):
                    hi[b] = mid[b]
                else:
                    lo[b] = mid[b]
        for b in range(nb):
            out[k0 + b] = 0.5 * (lo[b] + hi[b])
    return out


@njit(cache=True, nogil=True)
def _level(a, eps):
    k = 0
    K = eps.shape[0]
    while k < K and a < eps[k]:
        k += 1
    return k


@njit(cache=True, nogil=True)
def cond4_hits(vals, grads, etas, dirs, eps):
    """hits[e, h, k] = #{p : min(|V_p - eta_e|, |grad_p . dir_h|) < eps_k}.

    ``eps`` must be strictly decreasing.
    """
    P, d = grads.shape
    E = etas.shape[0]
    H = dirs.shape[0]
    K = eps.shape[0]
    lev = np.zeros((E, H, K + 1), dtype=np.int64)
    ka = np.empty(E, dtype=np.int64)
    kb = np.empty(H, dtype=np.int64)
    small_h = np.empty(H, dtype=np.int64)
    for p in range(P):
        v = vals[p]
        for e in range(E):
            ka[e] = _level(abs(v - etas[e]), eps)
        ns = 0
        for h in range(H):
            g = 0.0
            for j in range(d):
                g += grads[p, j] * dirs[h, j]
            kb[h] = _level(abs(g), eps)
            if kb[h] > 0:
                small_h[ns] = h
                ns += 1
        for e in range(E):
            if ka[e] > 0:
                for h in range(H):
                    lev[e, h, max(ka[e], kb[h])] += 1
            else:
                for s in range(ns):
                    h = small_h[s]
                    lev[e, h, kb[h]] += 1
    hits = np.zeros((E, H, K), dtype=np.int64)
    for e in range(E):
        for h in range(H):
            acc = 0
            for k in range(K, 0, -1):
                acc += lev[e, h, k]
                hits[e, h, k - 1] = acc
    return hits
