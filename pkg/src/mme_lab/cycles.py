"""Periodic cycles of a rational map and their multipliers."""

import cmath
import enum
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import DegreeCapExceeded, RootSolveFailure
from .maps import INF, Polynomial, as_point, chordal, eval_map, iterate_map, local_derivative
from .roots import poly_roots

ORBIT_TOL = 1e-7
SUPER_TOL = 1e-9
NEUTRAL_TOL = 1e-9
ROOT_OF_UNITY_TOL = 1e-6
MAX_PARABOLIC_M = 64


class CycleClass(str, enum.Enum):
    SUPERATTRACTING = "SUPERATTRACTING"
    ATTRACTING = "ATTRACTING"
    REPELLING = "REPELLING"
    PARABOLIC = "PARABOLIC"
    NEUTRAL_OTHER = "NEUTRAL_OTHER"


@dataclass(frozen=True)
class Cycle:
    points: tuple
    multiplier: complex
    kind: CycleClass
    id: int = -1
    petals_m: int = 0  # m for PARABOLIC(m), else 0

    @property
    def period(self):
        return len(self.points)

    @property
    def contains_inf(self):
        return any(p is INF for p in self.points)

    @property
    def is_attracting(self):
        return self.kind in (CycleClass.SUPERATTRACTING, CycleClass.ATTRACTING)

    @property
    def is_parabolic(self):
        return self.kind is CycleClass.PARABOLIC

    @property
    def is_non_repelling(self):
        return self.kind is not CycleClass.REPELLING

    def label(self):
        if self.kind is CycleClass.PARABOLIC:
            return f"PARABOLIC({self.petals_m})"
        return self.kind.value

    def to_dict(self):
        return {
            "id": self.id,
            "period": self.period,
            "points": [point_to_json(p) for p in self.points],
            "multiplier": [self.multiplier.real, self.multiplier.imag],
            "class": self.label(),
        }


def point_to_json(p):
    return "inf" if p is INF else [p.real, p.imag]


def classify(mu):
    """Return (CycleClass, m) for a multiplier; m is the petal count for PARABOLIC."""
    r = abs(mu)
    if r < SUPER_TOL:
        return CycleClass.SUPERATTRACTING, 0
    if r < 1 - NEUTRAL_TOL:
        return CycleClass.ATTRACTING, 0
    if r > 1 + NEUTRAL_TOL:
        return CycleClass.REPELLING, 0
    p = 1 + 0j
    for m in range(1, MAX_PARABOLIC_M + 1):
        p *= mu
        if abs(p - 1) < ROOT_OF_UNITY_TOL:
            return CycleClass.PARABOLIC, m
    return CycleClass.NEUTRAL_OTHER, 0


def multiplier(R, points):
    """Product of the local derivatives along the cycle (chart invariant)."""
    if isinstance(points, Cycle):
        points = points.points
    mu = 1 + 0j
    for p in points:
        mu *= local_derivative(R, p)
    return mu


def _canonical(points):
    """Rotate so the cycle starts at its smallest-modulus point (INF last)."""
    def key(i):
        p = points[i]
        if p is INF:
            return (float("inf"), 0.0)
        return (round(abs(p), 9), cmath.phase(p))
    start = min(range(len(points)), key=key)
    return tuple(points[start:]) + tuple(points[:start])


def _make_cycle(R, points):
    points = _canonical([as_point(p) for p in points])
    mu = multiplier(R, points)
    kind, m = classify(mu)
    return Cycle(points, mu, kind, -1, m)


def _orbit_of_inf(R, k_max):
    orbit = [INF]
    z = INF
    for _ in range(k_max):
        z = eval_map(R, z)
        if z is INF:
            return orbit
        orbit.append(z)
    return None


def _refine(R, k, z):
    """A few Newton steps on R^k(z) - z using chained local derivatives."""
    z0 = z
    for _ in range(6):
        w = z
        dk = 1 + 0j
        for _ in range(k):
            if w is INF:
                return z
            dk *= local_derivative(R, w)
            w = eval_map(R, w)
        if w is INF or dk == 1:
            return z
        w = complex(w)
        step = (w - z) / (dk - 1)
        z = z - step
        if abs(z - z0) > 1e-4 * max(1.0, abs(z0)):
            return z0
        if abs(step) <= 1e-16 * max(1.0, abs(z)):
            break
    return complex(z)


@nb.njit(cache=True)
def _hom(c, N, D):
    """Homogeneous sum c_i N^i D^(d-i) and its partials in N and D."""
    d = c.shape[0] - 1
    val = 0j
    dN = 0j
    dD = 0j
    for i in range(d + 1):
        if c[i] == 0:
            continue
        ni = N ** i
        di = D ** (d - i)
        val += c[i] * ni * di
        if i > 0:
            dN += c[i] * i * N ** (i - 1) * di
        if d - i > 0:
            dD += c[i] * (d - i) * ni * D ** (d - i - 1)
    return val, dN, dD


@nb.njit(cache=True)
def _fixed_ratio(p, q, k, z):
    """Newton ratio of F(z) = num_k(z) - z den_k(z), evaluated by iteration.

    Returns (F/F', chordal gap between R^k(z) and z).
    """
    N = z
    D = 1.0 + 0j
    dN = 1.0 + 0j
    dD = 0j
    for _ in range(k):
        s = max(abs(N), abs(D))
        if s == 0:
            return complex(np.inf, 0.0), 0.0
        N /= s
        D /= s
        dN /= s
        dD /= s
        a, aN, aD = _hom(p, N, D)
        b, bN, bD = _hom(q, N, D)
        dN, dD = aN * dN + aD * dD, bN * dN + bD * dD
        N, D = a, b
    F = N - z * D
    dF = dN - D - z * dD
    az = abs(z)
    nd = math.hypot(abs(N), abs(D)) * math.hypot(1.0, az)
    if nd == 0:
        return complex(np.inf, 0.0), 2.0
    gap = 2.0 * abs(F) / nd
    if dF == 0:
        return complex(np.inf, 0.0), gap
    return F / dF, gap


@nb.njit(cache=True)
def _polish_periodic(p, q, k, z, max_iter):
    """Aberth iteration on R^k(z) = z started from ``z`` (modified in place)."""
    n = z.shape[0]
    done = np.zeros(n, dtype=np.bool_)
    for _ in range(max_iter):
        active = 0
        for i in range(n):
            if done[i]:
                continue
            active += 1
            ratio, gap = _fixed_ratio(p, q, k, z[i])
            s = 0j
            for j in range(n):
                if j != i:
                    dz = z[i] - z[j]
                    if dz != 0:
                        s += 1.0 / dz
            den = 1.0 - ratio * s
            if den == 0 or not (np.isfinite(ratio.real) and np.isfinite(ratio.imag)):
                done[i] = True
                continue
            corr = ratio / den
            if not (np.isfinite(corr.real) and np.isfinite(corr.imag)):
                done[i] = True
                continue
            z[i] -= corr
            if abs(corr) <= 4e-16 * max(1.0, abs(z[i])):
                done[i] = True
        if active == 0:
            break
    gaps = np.empty(n)
    for i in range(n):
        _, gaps[i] = _fixed_ratio(p, q, k, z[i])
    return gaps


def periodic_points(R, k):
    """Finite solutions of R^k(z) = z with multiplicity, as (point, m) pairs.

    Starting points come from the expanded coefficients of R^k; the final
    polish evaluates R^k by iteration, which stays well conditioned where the
    expanded coefficients are not.
    """
    Rk = iterate_map(R, k)
    F = Rk.num - Rk.den * Polynomial([0.0, 1.0])
    if F.degree < 1:
        return []
    start = []
    for z, m in poly_roots(F.coeffs, pretrimmed=True, tol=1e-6).roots:
        start.extend([z] * m)
    z = np.array(start, dtype=np.complex128)
    p = R.num.padded(R.degree + 1)
    q = R.den.padded(R.degree + 1)
    gaps = _polish_periodic(p, q, k, z, 2000)
    if np.max(gaps) > 1e-6:
        raise RootSolveFailure(f"periodic points of period {k} did not converge")
    groups = []
    for w in z:
        w = complex(w)
        for g in groups:
            if abs(g[0] - w) <= LOOSE_MERGE * max(1.0, abs(w)) and _is_neutral(R, k, g[0]):
                g[1].append(w)
                break
        else:
            groups.append((w, [w]))
    out = []
    for _, members in groups:
        out.append((complex(np.mean(members)), len(members)))
    return out


LOOSE_MERGE = 1e-4


def _is_neutral(R, k, z):
    """True if z lies near a cycle whose R^k-multiplier is close to 1."""
    d = 1 + 0j
    w = z
    for _ in range(k):
        d *= local_derivative(R, w)
        w = eval_map(R, w)
        if w is INF:
            return False
    return abs(d - 1) < 1e-2


def find_cycles(R, k_max=4):
    """All cycles of exact period <= k_max, deduplicated, ids in discovery order."""
    if not 1 <= k_max <= 6:
        raise ValueError("k_max must be in 1..6")
    if R.degree ** k_max > 4096:
        raise DegreeCapExceeded(f"degree {R.degree}**{k_max} exceeds cap")
    cycles = []
    inf_orbit = _orbit_of_inf(R, k_max)
    if inf_orbit is not None:
        cycles.append(_make_cycle(R, inf_orbit))

    for k in range(1, k_max + 1):
        roots = [
            _refine(R, k, as_point(z)) if m == 1 else as_point(z)
            for z, m in periodic_points(R, k)
        ]
        if not roots:
            continue
        arr = np.array(roots, dtype=np.complex128)
        used = set()
        for i, z in enumerate(roots):
            if i in used:
                continue
            if inf_orbit is not None and any(chordal(z, p) < ORBIT_TOL for p in inf_orbit):
                used.add(i)
                continue
            # follow the orbit inside the root set; indices avoid tolerance
            # clashes between nearby points of different periods
            orbit = [i]
            period = None
            cur = i
            for j in range(1, k + 1):
                w = eval_map(R, roots[cur])
                if w is INF:
                    break
                nxt = int(np.argmin(np.abs(arr - w)))
                if chordal(roots[nxt], w) > ORBIT_TOL:
                    break
                if nxt == i:
                    period = j
                    break
                orbit.append(nxt)
                cur = nxt
            used.update(orbit)
            if period != k:
                continue
            cycles.append(_make_cycle(R, [roots[j] for j in orbit]))

    return [
        Cycle(c.points, c.multiplier, c.kind, i, c.petals_m) for i, c in enumerate(cycles)
    ]


def cycle_containing(cycles, z, tol=1e-6):
    """The cycle with a point within chordal ``tol`` of z, or None."""
    z = as_point(z)
    for c in cycles:
        if any(chordal(p, z) < tol for p in c.points):
            return c
    return None
