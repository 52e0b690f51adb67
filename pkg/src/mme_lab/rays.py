"""External rays of polynomials with connected Julia set.

A ray is traced through the potentials G_k = G_0 / d**k.  All angles in the
forward orbit of theta under t -> d*t mod 1 are carried together: the point
of angle t at potential G/d is the preimage of the point of angle d*t at
potential G that lies nearest the previous point of angle t.  Samples store
the potential log r instead of r, since r - 1 drops below double precision
after a few dozen steps.
"""

import cmath
import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .atlas import connectivity_of_J_polynomial
from .errors import JNotConnected, NotAPolynomial
from .maps import chordal
from .roots import roots_small

LANDED = "LANDED"
NOT_LANDED = "NOT_LANDED"
LOST = "LOST"

COLAND = "COLAND"
DISTINCT = "DISTINCT"
UNDECIDED = "UNDECIDED"

STEP_BOUND = 0.5
WARMUP = 5
SUBSTEPS = 4


@dataclass(frozen=True)
class RayTrace:
    theta: Fraction
    samples: tuple  # (potential G = log r, point)
    status: str
    map_fingerprint: str = ""

    @property
    def potentials(self):
        return np.array([g for g, _ in self.samples])

    @property
    def points(self):
        return np.array([z for _, z in self.samples])

    @property
    def radii(self):
        return np.exp(self.potentials)


def as_angle(theta, max_denominator=10**6):
    """An angle in turns as an exact fraction in [0, 1)."""
    if isinstance(theta, Fraction):
        f = theta
    elif isinstance(theta, int):
        f = Fraction(theta)
    elif isinstance(theta, str):
        f = Fraction(theta)
    else:
        f = Fraction(float(theta)).limit_denominator(max_denominator)
    return f - math.floor(f)


def angle_orbit(theta, d):
    """theta, d*theta, d^2*theta, ... mod 1 until the first repeat."""
    out = [theta]
    seen = {theta: 0}
    while True:
        t = (out[-1] * d) % 1
        if t in seen:
            return out, seen[t]
        seen[t] = len(out)
        out.append(t)


def monic_normalization(R):
    """(c, coefficients of u -> c P(u/c)), which is monic when c^(d-1) = a_d."""
    if not R.is_polynomial:
        raise NotAPolynomial("external rays need a polynomial")
    a = np.asarray(R.as_polynomial_coeffs(), dtype=np.complex128)
    d = len(a) - 1
    c = complex(a[d]) ** (1.0 / (d - 1))
    coeffs = np.array([a[i] * c ** (1 - i) for i in range(d + 1)], dtype=np.complex128)
    coeffs[d] = 1.0
    return c, coeffs


def _peval(c, z):
    w = 0j
    for a in c[::-1]:
        w = w * z + a
    return complex(w)


def _preimage_near(c, w, ref):
    f = c.copy()
    f[0] -= w
    roots, err = roots_small(f)
    k = int(np.argmin(np.abs(roots - ref)))
    z = complex(roots[k])
    # two Newton steps against the unshifted polynomial
    dc = c[1:] * np.arange(1, len(c))
    for _ in range(2):
        fp = _peval(dc, z)
        if fp == 0:
            break
        z -= (_peval(c, z) - w) / fp
    return z


def _asymptotic(c, G, t):
    """phi^{-1}(e^{G + 2 pi i t}) to leading order: the Boettcher map is z + a_{d-1}/d + O(1/z)."""
    d = len(c) - 1
    return cmath.exp(G + 2j * math.pi * float(t)) - c[d - 1] / d


def trace_ray(R, theta, r_start=1e4, r_end=None, steps=400, check_connected=True, substeps=SUBSTEPS):
    """Trace the ray of angle ``theta`` (turns) from potential log(r_start) down.

    Potentials follow G_k = log(r_start) * d^(-k/substeps).  ``steps`` samples
    are taken unless ``r_end`` (> 1) stops the trace earlier.  Sample k maps
    under R to sample k - substeps of the trace of d*theta.
    """
    c, coeffs = monic_normalization(R)
    if check_connected and connectivity_of_J_polynomial(R) != "CONNECTED":
        raise JNotConnected("the Julia set is not connected")
    if r_start <= 1:
        raise ValueError("r_start must exceed 1")
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    d = len(coeffs) - 1
    s = int(substeps)
    theta = as_angle(theta)
    orbit, _ = angle_orbit(theta, d)
    idx = {t: i for i, t in enumerate(orbit)}
    nxt = [idx[(t * d) % 1] for t in orbit]
    G0 = math.log(r_start)
    G_end = math.log(r_end) if r_end is not None else 0.0
    q = float(d) ** (-1.0 / s)

    def pot(k):
        return G0 * q**k

    # warm up from a much larger potential, where the asymptotic guess is exact;
    # hist[i] holds every angle's point at potential pot(k0 + i)
    k0 = -WARMUP * s
    hist = [[_asymptotic(coeffs, pot(k), t) for t in orbit] for k in range(k0, k0 + s)]
    k = k0 + s
    samples = []
    status = NOT_LANDED
    while len(samples) < steps:
        G = pot(k)
        if k > 0 and G <= G_end:
            break
        prev, src = hist[-1], hist[0]  # potentials pot(k - 1) and d * pot(k)
        if k <= 0:
            # at huge potentials both preimages are equidistant from prev in
            # floating point; the asymptotic guess separates them
            ref = [_asymptotic(coeffs, G, t) for t in orbit]
        else:
            ref = prev
        new = [_preimage_near(coeffs, src[nxt[j]], ref[j]) for j in range(len(orbit))]
        if k > 0 and any(chordal(a / c, b / c) > STEP_BOUND for a, b in zip(prev, new)):
            status = LOST
            break
        hist.append(new)
        hist.pop(0)
        if k >= 0:
            samples.append((G, complex(new[0] / c)))
        k += 1
    ray = RayTrace(theta, tuple(samples), status, R.fingerprint())
    if status != LOST:
        lp = landing(ray)
        ray = RayTrace(theta, tuple(samples), lp[0], R.fingerprint())
    return ray


def landing(ray, tol=1e-6, tail=0.2):
    """(LANDED, point) if the tail of the trace sits within tol of its mean, else (NOT_LANDED, None)."""
    if ray.status == LOST:
        raise ValueError("ray was lost; landing is undefined")
    pts = [z for _, z in ray.samples]
    k = max(2, int(math.ceil(tail * len(pts))))
    tailpts = np.array(pts[-k:])
    mean = complex(np.mean(tailpts))
    if all(chordal(complex(z), mean) < tol for z in tailpts):
        return LANDED, mean
    return NOT_LANDED, None


def colanding_pair(R, theta0, theta1, tol=1e-6, **kw):
    """(COLAND, z0) / (DISTINCT, (p0, p1)) / (UNDECIDED, None)."""
    rays = [trace_ray(R, t, **kw) for t in (theta0, theta1)]
    if any(r.status == LOST for r in rays):
        return UNDECIDED, None
    l0, l1 = (landing(r, tol) for r in rays)
    if l0[0] != LANDED or l1[0] != LANDED:
        return UNDECIDED, None
    dist = chordal(l0[1], l1[1])
    if dist < tol:
        return COLAND, (l0[1] + l1[1]) / 2
    if dist > 10 * tol:
        return DISTINCT, (l0[1], l1[1])
    return UNDECIDED, None


def approach_direction(ray, point, dist):
    """Unit vector from ``point`` to the innermost ray sample farther than ``dist``."""
    pts = [z for _, z in ray.samples]
    best = None
    for z in pts:
        if abs(z - point) > dist:
            best = z
    if best is None:
        best = pts[0]
    v = best - point
    return v / abs(v)


def cut_point_probes(atlas, ray0, ray1, point, delta=None):
    """Labels of two probes near ``point``, one in each sector cut out by the two rays."""
    if delta is None:
        delta = 6 * atlas.window.cell
    a0 = np.angle(approach_direction(ray0, point, 4 * delta))
    a1 = np.angle(approach_direction(ray1, point, 4 * delta))
    mid = (a0 + a1) / 2
    probes = [point + delta * np.exp(1j * mid), point + delta * np.exp(1j * (mid + np.pi))]
    return [atlas.label_at(p) for p in probes], probes


def write_ray_csv(ray, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "re", "im", "log_r"])
        for g, z in ray.samples:
            w.writerow([repr(math.exp(g)), repr(z.real), repr(z.imag), repr(g)])


def read_ray_csv(path):
    with open(path, newline="") as fh:
        return [(float(r["log_r"]), complex(float(r["re"]), float(r["im"]))) for r in csv.DictReader(fh)]
