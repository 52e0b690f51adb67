"""Backward random iteration sampler for the measure of maximal entropy.

A single backward path is followed: at each step one of the d preimages
(counted with multiplicity) is chosen uniformly.  The uniform draw for step i
is the i-th output of a Philox stream keyed by ``rng_seed``, so a path is a
pure function of (map, seed point, burn_in, n, rng_seed).
"""

import csv
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .cycles import CycleClass, find_cycles
from .errors import ExceptionalSeed, RootSolveFailure
from .maps import INF, as_point, chordal_array, eval_array
from .roots import RootSet, roots_small

TRAP_STEPS = 50
TRAP_TOL = 1e-9

_OK = 0
_TRAPPED = 1
_ROOT_FAIL = 2


@dataclass(frozen=True, eq=False)
class MMESampleSet:
    points: np.ndarray
    seed_point: object
    burn_in: int
    n: int
    rng_seed: int
    map_fingerprint: str

    def __len__(self):
        return self.n

    def __post_init__(self):
        self.points.setflags(write=False)


def uniform_stream(rng_seed, count):
    """``count`` uniforms in [0, 1); entry i depends only on (rng_seed, i)."""
    gen = np.random.Generator(np.random.Philox(key=int(rng_seed) & ((1 << 64) - 1)))
    return gen.random(count)


def choose_preimage(roots: RootSet, u):
    """Pick from a RootSet with probability multiplicity/total, using u in [0,1)."""
    total = roots.total
    target = u * total
    acc = 0
    for z, m in roots.roots:
        acc += m
        if target < acc:
            return z
    return roots.roots[-1][0]


@nb.njit(cache=True)
def _close(a, b):
    if np.isinf(a.real) or np.isinf(b.real):
        return np.isinf(a.real) and np.isinf(b.real)
    return 2.0 * abs(a - b) / math.hypot(1.0, abs(a)) / math.hypot(1.0, abs(b)) < TRAP_TOL


@nb.njit(cache=True)
def _backward_path(p, q, seed, uniforms, burn_in, n):
    """Run the path; returns (status, samples). ``p``/``q`` padded to length d+1."""
    d = p.shape[0] - 1
    out = np.empty(n, dtype=np.complex128)
    z = seed
    F = np.empty(d + 1, dtype=np.complex128)
    thr = 1e-13 * max(np.max(np.abs(p)), np.max(np.abs(q)))
    # trap detection: distinct points seen since the start
    a = seed
    b = complex(np.nan, np.nan)
    have_b = False
    trapped = True
    for step in range(burn_in + n):
        if np.isinf(z.real):
            for i in range(d + 1):
                F[i] = q[i]
        else:
            for i in range(d + 1):
                F[i] = p[i] - z * q[i]
        deg = d
        while deg > 0 and abs(F[deg]) <= thr * (1.0 + (0.0 if np.isinf(z.real) else abs(z))):
            deg -= 1
        k = int(uniforms[step] * d)
        if k >= d:
            k = d - 1
        if k >= deg:
            z = complex(np.inf, 0.0)
        else:
            roots, err = roots_small(F[: deg + 1].copy())
            if err > 1e-10:
                return _ROOT_FAIL, out
            z = roots[k]
        if trapped and step < TRAP_STEPS:
            if not _close(z, a):
                if not have_b:
                    b = z
                    have_b = True
                elif not _close(z, b):
                    trapped = False
            if step == TRAP_STEPS - 1 and trapped:
                return _TRAPPED, out
        if step >= burn_in:
            out[step - burn_in] = z
    if trapped and burn_in + n < TRAP_STEPS:
        return _TRAPPED, out
    return _OK, out


def default_seed(R):
    """A repelling fixed point (it lies in J); falls back to a fixed random point."""
    for c in find_cycles(R, 1):
        if c.kind is CycleClass.REPELLING and c.points[0] is not INF:
            return c.points[0]
    return complex(0.3141592653589793, 0.2718281828459045)


def sample_backward(R, seed=None, burn_in=100, n=100_000, rng_seed=0):
    """Draw ``n`` points along one backward random orbit after ``burn_in`` steps."""
    if burn_in < 1 or n < 1:
        raise ValueError("burn_in and n must be >= 1")
    seed = default_seed(R) if seed is None else as_point(seed)
    d = R.degree
    p = R.num.padded(d + 1)
    q = R.den.padded(d + 1)
    z0 = complex(np.inf, 0.0) if seed is INF else complex(seed)
    u = uniform_stream(rng_seed, burn_in + n)
    status, pts = _backward_path(p, q, z0, u, burn_in, n)
    if status == _TRAPPED:
        raise ExceptionalSeed(f"backward orbit of {seed} stays in at most two points")
    if status == _ROOT_FAIL:
        raise RootSolveFailure("preimage solve failed during backward iteration")
    return MMESampleSet(pts, seed, burn_in, n, int(rng_seed), R.fingerprint())


def _f_chordal_x(z):
    with np.errstate(invalid="ignore", over="ignore"):
        v = 2.0 * z.real / (1.0 + np.abs(z) ** 2)
    return np.where(np.isfinite(z), v, 0.0)


def _f_chordal_y(z):
    with np.errstate(invalid="ignore", over="ignore"):
        v = 2.0 * z.imag / (1.0 + np.abs(z) ** 2)
    return np.where(np.isfinite(z), v, 0.0)


REFERENCE_POINT = complex(0.3, 0.2)


def _f_distance_to_reference(z):
    finite = np.isfinite(z)
    out = np.empty(z.shape)
    out[finite] = chordal_array(z[finite], REFERENCE_POINT)
    out[~finite] = 2.0 / math.sqrt(1.0 + abs(REFERENCE_POINT) ** 2)
    return out


DEFAULT_TEST_FUNCTIONS = {
    "chordal_x": _f_chordal_x,
    "chordal_y": _f_chordal_y,
    "dist_ref": _f_distance_to_reference,
}


def invariance_check(samples, R, fs=None):
    """Compare empirical means of f and f o R; returns [(delta, threshold), ...].

    ``fs`` is a list of vectorized callables (default: the two chordal
    coordinates and chordal distance to a fixed reference point).  A test
    passes when delta <= threshold = 4 * std(f) / sqrt(n).
    """
    pts = samples.points if isinstance(samples, MMESampleSet) else np.asarray(samples)
    if fs is None:
        fs = list(DEFAULT_TEST_FUNCTIONS.values())
    images = eval_array(R, pts)
    n = len(pts)
    out = []
    for f in fs:
        a = np.asarray(f(pts), dtype=float)
        b = np.asarray(f(images), dtype=float)
        delta = abs(float(np.mean(b)) - float(np.mean(a)))
        thr = 4.0 * float(np.std(a)) / math.sqrt(n)
        out.append((delta, thr))
    return out


def support_coverage(samples, probe_points, radius):
    """Fraction of probes with some sample strictly within ``radius`` (Euclidean)."""
    from scipy.spatial import cKDTree

    pts = samples.points if isinstance(samples, MMESampleSet) else np.asarray(samples)
    probes = [as_point(p) for p in probe_points]
    if not probes:
        return 0.0
    if radius <= 0:
        return 0.0
    finite = pts[np.isfinite(pts)]
    tree = cKDTree(np.column_stack([finite.real, finite.imag]))
    hit = 0
    for pr in probes:
        if pr is INF:
            continue
        dist, _ = tree.query([pr.real, pr.imag])
        if dist < radius:
            hit += 1
    return hit / len(probes)


def write_samples_csv(samples, path):
    """CSV with columns re,im; a point at infinity is an error."""
    pts = samples.points
    if not np.all(np.isfinite(pts)):
        raise ValueError("sample set contains the point at infinity")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for z in pts:
            w.writerow([repr(float(z.real)), repr(float(z.imag))])


def read_samples_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
