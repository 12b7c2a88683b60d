"""Reference implementations used only by the tests.

They share no code with the package: eigenvalues come from Householder
tridiagonalization plus Sturm-count bisection, the discrete bound from plain
Python iteration.
"""

import math

import numpy as np


def tridiagonalize(M):
    """Householder reduction of a symmetric matrix; returns (diagonal, off-diagonal)."""
    a = np.array(M, dtype=float)
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1:, k].copy()
        alpha = -math.copysign(np.linalg.norm(x), x[0] if x[0] != 0 else 1.0)
        v = x.copy()
        v[0] -= alpha
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        H = np.eye(n)
        H[k + 1:, k + 1:] -= 2.0 * np.outer(v, v)
        a = H @ a @ H
    return np.diag(a).copy(), np.array([a[i + 1, i] for i in range(n - 1)])


def sturm_count(d, e, x):
    """Number of eigenvalues of the tridiagonal (d, e) strictly below x."""
    count, q = 0, 1.0
    tiny = 1e-300
    for i in range(len(d)):
        off = e[i - 1] ** 2 if i > 0 else 0.0
        q = d[i] - x - (off / q if i > 0 else 0.0)
        if q == 0.0:
            q = -tiny
        if q < 0:
            count += 1
    return count


def bisection_eigenvalues(M, tol=1e-15):
    """All eigenvalues, ascending, by bisection on the Sturm count."""
    d, e = tridiagonalize(M)
    n = len(d)
    radius = max((abs(d[i]) + (abs(e[i - 1]) if i > 0 else 0) + (abs(e[i]) if i < n - 1 else 0))
                 for i in range(n))
    lo0, hi0 = -radius - 1.0, radius + 1.0
    out = []
    for k in range(n):
        lo, hi = lo0, hi0
        while hi - lo > tol * max(1.0, radius):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if sturm_count(d, e, mid) > k:
                hi = mid
            else:
                lo = mid
        out.append(0.5 * (lo + hi))
    return np.array(out)


def closed_form_2x2(M):
    a, b, d = M[0][0], M[0][1], M[1][1]
    m, r = 0.5 * (a + d), math.hypot(0.5 * (a - d), b)
    return np.array([m - r, m + r])


def random_symmetric(rng, d, scale=None):
    scale = rng.uniform(0.1, 10.0) if scale is None else scale
    Q = rng.normal(size=(d, d)) * scale
    return 0.5 * (Q + Q.T)
