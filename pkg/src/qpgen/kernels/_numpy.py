"""Pure-numpy kernels, vectorized over the independent axis of each problem."""
import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0 ** -53
_TWO_PI = 2.0 * np.pi
_CHUNK = 1 << 15


def _mix(x):
    z = x + _GAMMA
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


def xoshiro_uniform(seeds, count):
    # one lane per stream; lanes advance together
    x = np.asarray(seeds, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        s0 = _mix(x)
        x += _GAMMA
        s1 = _mix(x)
        x += _GAMMA
        s2 = _mix(x)
        x += _GAMMA
        s3 = _mix(x)
        out = np.empty((x.shape[0], count), dtype=np.float64)
        s17 = np.uint64(17)
        s11 = np.uint64(11)
        for i in range(count):
            result = _rotl(s0 + s3, 23) + s0
            t = s1 << s17
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = _rotl(s3, 45)
            out[:, i] = (result >> s11).astype(np.float64) * _TWO_M53
    return out


def trig_jets(freqs, cos_c, sin_c, const, X, order):
    P, d = X.shape
    F = freqs.astype(np.float64)
    val = np.empty(P)
    grad = np.zeros((P if order >= 1 else 0, d))
    hess = np.zeros((P if order >= 2 else 0, d, d))
    for lo in range(0, P, _CHUNK):
        sl = slice(lo, min(P, lo + _CHUNK))
        T = X[sl] @ F.T
        T -= np.floor(T + 0.5)
        T *= _TWO_PI
        C = np.cos(T)
        S = np.sin(T)
        val[sl] = const + C @ cos_c + S @ sin_c
        if order >= 1:
            W1 = _TWO_PI * (C * sin_c - S * cos_c)
            grad[sl] = W1 @ F
        if order >= 2:
            W2 = -_TWO_PI * _TWO_PI * (C * cos_c + S * sin_c)
            hess[sl] = np.einsum("pr,ri,rj->pij", W2, F, F)
    return val, grad, hess


def sturm_count(diag, off, x, pivmin):
    q = diag[0] - x
    if abs(q) < pivmin:
        q = -pivmin
    cnt = int(q < 0.0)
    for i in range(1, diag.shape[0]):
        q = diag[i] - x - off[i - 1] * off[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        cnt += q < 0.0
    return int(cnt)


def bisect_eigenvalues(diag, e2, gl, gu, pivmin, niter):
    n = diag.shape[0]
    target = np.arange(n)
    lo = np.full(n, gl)
    hi = np.full(n, gu)
    q = np.empty(n)
    tmp = np.empty(n)
    cnt = np.empty(n, dtype=np.int64)
    for _ in range(niter):
        mid = 0.5 * (lo + hi)
        np.subtract(diag[0], mid, out=q)
        q[np.abs(q) < pivmin] = -pivmin
        np.less(q, 0.0, out=cnt, casting="unsafe")
        for i in range(1, n):
            # q <- diag[i] - mid - e2/q, same operation order as the loop kernel
            np.subtract(diag[i], mid, out=tmp)
            np.divide(e2[i - 1], q, out=q)
            np.subtract(tmp, q, out=q)
            q[np.abs(q) < pivmin] = -pivmin
            cnt += q < 0.0
        upper = cnt > target
        hi = np.where(upper, mid, hi)
        lo = np.where(upper, lo, mid)
    return 0.5 * (lo + hi)


def cond4_hits(vals, grads, etas, dirs, eps):
    P = vals.shape[0]
    E = etas.shape[0]
    H = dirs.shape[0]
    K = eps.shape[0]
    hits = np.zeros((E, H, K), dtype=np.int64)
    for lo in range(0, P, _CHUNK):
        sl = slice(lo, min(P, lo + _CHUNK))
        B = np.abs(grads[sl] @ dirs.T)
        v = vals[sl]
        for e in range(E):
            a = np.abs(v - etas[e])
            for k in range(K):
                hit = (B < eps[k]) | (a < eps[k])[:, None]
                hits[e, :, k] += hit.sum(axis=0)
    return hits
