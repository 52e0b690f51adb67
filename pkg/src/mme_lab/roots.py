"""Simultaneous-iteration (Aberth-Ehrlich) polynomial root finder.

Coefficients are ascending: ``c[k]`` multiplies ``z**k``.  The numba kernels
are shared with the sampler, so they must stay nopython-compatible.
"""

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import RootSolveFailure

RESIDUAL_TOL = 1e-10
CLUSTER_RADIUS = 1e-7
# roots closer than this are candidates for a verified multiple root
LOOSE_CLUSTER_RADIUS = 1e-3
MAX_ITER = 800
MAX_RESTARTS = 4


@nb.njit(cache=True)
def _ratio_and_error(c, z):
    """Return (p/p', backward error of z as a root of p)."""
    n = c.shape[0] - 1
    az = abs(z)
    if az <= 1.0:
        p = c[n]
        dp = 0j
        s = abs(c[n])
        for k in range(n - 1, -1, -1):
            dp = dp * z + p
            p = p * z + c[k]
            s = s * az + abs(c[k])
        if dp == 0:
            return complex(np.inf, 0.0), abs(p) / s
        return p / dp, abs(p) / s
    u = 1.0 / z
    au = abs(u)
    q = c[0]
    dq = 0j
    s = abs(c[0])
    for k in range(1, n + 1):
        dq = dq * u + q
        q = q * u + c[k]
        s = s * au + abs(c[k])
    den = n * q - u * dq
    if den == 0:
        return complex(np.inf, 0.0), abs(q) / s
    return z * q / den, abs(q) / s


@nb.njit(cache=True)
def _initial_guesses(c, offset, scale):
    """Bini's starting points: circles from the upper convex hull of log|c_k|."""
    n = c.shape[0] - 1
    ks = np.empty(n + 1, dtype=np.int64)
    ls = np.empty(n + 1)
    m = 0
    for k in range(n + 1):
        if c[k] != 0:
            ks[m] = k
            ls[m] = math.log(abs(c[k]))
            m += 1
    hull = np.empty(m, dtype=np.int64)
    h = 0
    for i in range(m):
        while h >= 2:
            a = hull[h - 2]
            b = hull[h - 1]
            cross = (ks[b] - ks[a]) * (ls[i] - ls[a]) - (ls[b] - ls[a]) * (ks[i] - ks[a])
            if cross >= 0:
                h -= 1
            else:
                break
        hull[h] = i
        h += 1
    z = np.empty(n, dtype=np.complex128)
    pos = 0
    for e in range(h - 1):
        a = hull[e]
        b = hull[e + 1]
        cnt = ks[b] - ks[a]
        radius = math.exp((ls[a] - ls[b]) / cnt) * scale
        for j in range(cnt):
            ang = 2.0 * math.pi * j / cnt + 2.0 * math.pi * e / n + offset
            z[pos] = radius * complex(math.cos(ang), math.sin(ang))
            pos += 1
    return z


@nb.njit(cache=True)
def _aberth(c, z, max_iter):
    """In-place Gauss-Seidel Aberth iteration; returns max backward error."""
    n = z.shape[0]
    tol = 4.0 * 2.220446049250313e-16 * (n + 1)
    done = np.zeros(n, dtype=np.bool_)
    errs = np.full(n, np.inf)
    for _ in range(max_iter):
        n_done = 0
        for i in range(n):
            if done[i]:
                n_done += 1
                continue
            ratio, err = _ratio_and_error(c, z[i])
            errs[i] = err
            if err <= tol:
                done[i] = True
                continue
            s = 0j
            for j in range(n):
                if j != i:
                    d = z[i] - z[j]
                    if d != 0:
                        s += 1.0 / d
            den = 1.0 - ratio * s
            if den == 0:
                corr = ratio
            else:
                corr = ratio / den
            if not (np.isfinite(corr.real) and np.isfinite(corr.imag)):
                corr = ratio
            z[i] -= corr
            if abs(corr) <= 2.220446049250313e-16 * abs(z[i]):
                done[i] = True
        if n_done == n:
            break
    worst = 0.0
    for i in range(n):
        _, err = _ratio_and_error(c, z[i])
        if err > worst:
            worst = err
    return worst


@nb.njit(cache=True)
def _solve(c, max_iter, max_restarts):
    """Roots of c (leading and constant coefficients nonzero). Returns (roots, error)."""
    offset = 0.7
    scale = 1.0
    z = _initial_guesses(c, offset, scale)
    err = _aberth(c, z, max_iter)
    r = 0
    while err > 1e-10 and r < max_restarts:
        r += 1
        offset = 0.7 + 1.3 * r
        scale = 1.0 + 0.07 * r * (1 if r % 2 == 0 else -1)
        z = _initial_guesses(c, offset, scale)
        err = _aberth(c, z, max_iter)
    return z, err


@nb.njit(cache=True)
def roots_small(c):
    """Raw roots (with repetition) for use inside kernels; degree >= 1."""
    n = c.shape[0] - 1
    if n == 1:
        out = np.empty(1, dtype=np.complex128)
        out[0] = -c[0] / c[1]
        return out, 0.0
    if n == 2:
        a = c[2]
        b = c[1]
        cc = c[0]
        disc = np.sqrt(b * b - 4.0 * a * cc)
        if (b.conjugate() * disc).real < 0:
            disc = -disc
        q = -0.5 * (b + disc)
        out = np.empty(2, dtype=np.complex128)
        if q == 0:
            out[0] = 0j
            out[1] = 0j
        else:
            out[0] = q / a
            out[1] = cc / q
        return out, 0.0
    zeros = 0
    while zeros < n and c[zeros] == 0:
        zeros += 1
    out = np.zeros(n, dtype=np.complex128)
    if zeros == n:
        return out, 0.0
    rest, err = _solve(c[zeros:], MAX_ITER, MAX_RESTARTS)
    out[zeros:] = rest
    return out, err


def coefficient_scale(c):
    return float(np.max(np.abs(c))) if len(c) else 0.0


def trim(c, rel=1e-13, scale=None):
    """Drop leading coefficients that are zero up to ``rel``.

    Without ``scale`` the reference is the largest modulus.  With ``scale``
    (same length as c, the magnitude of the terms that produced each
    coefficient) a coefficient counts as zero only if it cancelled.
    """
    c = np.asarray(c, dtype=np.complex128)
    if c.size == 0:
        return c
    n = c.size
    if scale is None:
        thr = rel * np.max(np.abs(c))
        while n > 0 and abs(c[n - 1]) <= thr:
            n -= 1
    else:
        while n > 0 and abs(c[n - 1]) <= rel * scale[n - 1]:
            n -= 1
    return c[:n].copy()


@dataclass(frozen=True)
class RootSet:
    """Roots with multiplicities; ``residual`` is the worst relative residual."""

    roots: tuple
    residual: float

    @property
    def total(self):
        return sum(m for _, m in self.roots)

    def points(self):
        return [z for z, _ in self.roots]

    def expanded(self):
        out = []
        for z, m in self.roots:
            out.extend([z] * m)
        return out

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)


def _derivative(c):
    return c[1:] * np.arange(1, len(c))


def _weighted_error(c, z, j):
    """Relative size of the j-th derivative of c at z."""
    d = c
    for _ in range(j):
        d = _derivative(d)
    if len(d) == 0:
        return 0.0
    powers = np.abs(z) ** np.arange(len(d))
    s = float(np.sum(np.abs(d) * powers))
    return abs(np.polynomial.polynomial.polyval(z, d)) / s if s > 0 else 0.0


def _polish_multiple(c, z, m):
    """Newton on the (m-1)-th derivative, which has a simple root at an m-fold root."""
    d = c
    for _ in range(m - 1):
        d = _derivative(d)
    dd = _derivative(d)
    for _ in range(8):
        f = np.polynomial.polynomial.polyval(z, d)
        fp = np.polynomial.polynomial.polyval(z, dd)
        if fp == 0:
            break
        step = f / fp
        z = z - step
        if abs(step) <= 1e-16 * max(1.0, abs(z)):
            break
    return complex(z)


def _cluster(c, raw):
    """Group raw roots: tight clusters always merge; loose ones merge if verified."""
    raw = list(raw)
    n = len(raw)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def groups(radius):
        for i in range(n):
            for j in range(i + 1, n):
                if abs(raw[i] - raw[j]) <= radius * max(1.0, abs(raw[i])):
                    parent[find(i)] = find(j)
        out = {}
        for i in range(n):
            out.setdefault(find(i), []).append(i)
        return list(out.values())

    tight = groups(CLUSTER_RADIUS)
    merged = [(complex(np.mean([raw[i] for i in g])), len(g), g) for g in tight]

    # second pass: loose clusters accepted only if the centroid is a genuine
    # multiple root (all derivatives below order m vanish there)
    centers = [m[0] for m in merged]
    mult = [m[1] for m in merged]
    k = len(centers)
    parent2 = list(range(k))

    def find2(i):
        while parent2[i] != i:
            parent2[i] = parent2[parent2[i]]
            i = parent2[i]
        return i

    for i in range(k):
        for j in range(i + 1, k):
            if abs(centers[i] - centers[j]) <= LOOSE_CLUSTER_RADIUS * max(1.0, abs(centers[i])):
                parent2[find2(i)] = find2(j)
    buckets = {}
    for i in range(k):
        buckets.setdefault(find2(i), []).append(i)
    result = []
    for idx in buckets.values():
        if len(idx) == 1:
            i = idx[0]
            result.append((centers[i], mult[i]))
            continue
        m = sum(mult[i] for i in idx)
        cen = sum(centers[i] * mult[i] for i in idx) / m
        cen = _polish_multiple(c, cen, m)
        ok = all(_weighted_error(c, cen, j) <= 1e-8 for j in range(m))
        if ok:
            result.append((cen, m))
        else:
            result.extend((centers[i], mult[i]) for i in idx)
    return result


def poly_roots(coeffs, tol=RESIDUAL_TOL, pretrimmed=False):
    """All roots of a polynomial given by ascending coefficients.

    Multiple roots come back once, with their multiplicity.  Raises
    RootSolveFailure when the worst relative residual stays above ``tol``.
    """
    c = np.asarray(coeffs, dtype=np.complex128) if pretrimmed else trim(coeffs)
    n = len(c) - 1
    if n < 1:
        raise ValueError("poly_roots needs a polynomial of degree >= 1")
    raw, err = roots_small(c)
    if not np.all(np.isfinite(raw)):
        raise RootSolveFailure(f"non-finite root estimate (degree {n})")
    residual = max((_weighted_error(c, z, 0) for z in raw), default=0.0)
    if residual > tol:
        raise RootSolveFailure(f"residual {residual:.3g} above {tol:.1g} (degree {n})")
    clustered = _cluster(c, raw)
    clustered.sort(key=lambda t: (round(t[0].real, 12), round(t[0].imag, 12)))
    residual = max(
        max((_weighted_error(c, z, 0) for z, _ in clustered), default=0.0), residual
    )
    return RootSet(tuple(clustered), float(residual))
