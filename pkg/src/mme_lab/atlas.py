"""Grid atlas of Fatou components.

Each cell center is iterated forward until it settles on a non-repelling
cycle; cells with the same (cycle, phase) are split into blobs by 4-adjacency.
Rows run top to bottom (row 0 has the largest imaginary part).
"""

import math
import struct
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .cycles import CycleClass
from .errors import NotAPolynomial, OutOfWindow, UnknownComponent, WindowTooSmall
from .maps import INF, as_point, critical_points, eval_map, local_derivative, preimages

UNRESOLVED = -2
JULIA_NEAR = -1

TOL_ATTR = 1e-6
TOL_PAR = 1e-3
ESCAPE_RADIUS = 1e6
MONOTONE_STEPS = 100
MAX_ITER = 2000

_KIND_SKIP = -1
_KIND_ATTR = 0
_KIND_PAR = 1


@dataclass(frozen=True)
class GridWindow:
    center: complex
    half_width: float
    resolution: int

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "resolution", int(self.resolution))
        if self.resolution < 64:
            raise ValueError("resolution must be >= 64")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def cell(self):
        return 2.0 * self.half_width / self.resolution

    def contains(self, z):
        z = as_point(z)
        if z is INF:
            return False
        d = z - self.center
        return abs(d.real) <= self.half_width and abs(d.imag) <= self.half_width

    def cell_of(self, z):
        """(row, col) of the cell containing z; raises OutOfWindow."""
        if not self.contains(z):
            raise OutOfWindow(f"{z} lies outside the window")
        z = complex(z)
        n = self.resolution
        col = int((z.real - (self.center.real - self.half_width)) / self.cell)
        row = int(((self.center.imag + self.half_width) - z.imag) / self.cell)
        return min(max(row, 0), n - 1), min(max(col, 0), n - 1)

    def cells_of(self, z):
        """Vectorized cell lookup; returns (row, col, inside) arrays."""
        z = np.asarray(z, dtype=np.complex128)
        with np.errstate(invalid="ignore"):
            d = z - self.center
            inside = (
                np.isfinite(z)
                & (np.abs(d.real) <= self.half_width)
                & (np.abs(d.imag) <= self.half_width)
            )
        n = self.resolution
        col = np.zeros(z.shape, dtype=np.int64)
        row = np.zeros(z.shape, dtype=np.int64)
        col[inside] = np.clip(((d.real[inside] + self.half_width) / self.cell).astype(np.int64), 0, n - 1)
        row[inside] = np.clip(((self.half_width - d.imag[inside]) / self.cell).astype(np.int64), 0, n - 1)
        return row, col, inside

    def center_of(self, row, col):
        x = self.center.real - self.half_width + (col + 0.5) * self.cell
        y = self.center.imag + self.half_width - (row + 0.5) * self.cell
        return complex(x, y)

    def grid(self):
        n = self.resolution
        t = (np.arange(n) + 0.5) * self.cell - self.half_width
        return self.center.real + t, self.center.imag - t  # xs, ys (top row first)


@dataclass(frozen=True)
class Component:
    id: int
    cycle_id: int
    phase: int
    blob: int
    bounded: bool
    size: int
    touches_edge: bool

    def to_dict(self):
        return {
            "id": self.id,
            "cycle": self.cycle_id,
            "phase": self.phase,
            "blob": self.blob,
            "bounded": self.bounded,
            "cells": self.size,
        }


@dataclass(eq=False)
class FatouAtlas:
    window: GridWindow
    labels: np.ndarray  # component id per cell, UNRESOLVED where unclassified
    julia_near: np.ndarray  # bool mask
    components: dict
    has_unbounded_component: bool
    cycles: tuple = ()
    map_fingerprint: str = ""
    rmap: object = None
    params: dict = field(default_factory=dict)
    _trees: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.labels.setflags(write=False)
        self.julia_near.setflags(write=False)

    @property
    def unresolved_fraction(self):
        return float(np.mean(self.labels == UNRESOLVED))

    def component(self, cid):
        try:
            return self.components[cid]
        except KeyError:
            raise UnknownComponent(f"no component with id {cid}") from None

    def label_at(self, z):
        """Component id of the cell containing z, or UNRESOLVED."""
        r, c = self.window.cell_of(z)
        return int(self.labels[r, c])

    def component_at(self, z):
        cid = self.label_at(z)
        if cid < 0:
            raise UnknownComponent(f"cell containing {z} is not in a component")
        return cid

    def dump_labels(self):
        """Labels with JULIA_NEAR cells overriding the component id."""
        out = self.labels.copy()
        out[self.julia_near] = JULIA_NEAR
        return out

    def _boundary_points(self, mask):
        """Centers of mask cells that have a 4-neighbour outside the mask."""
        inner = mask.copy()
        inner[1:, :] &= mask[:-1, :]
        inner[:-1, :] &= mask[1:, :]
        inner[:, 1:] &= mask[:, :-1]
        inner[:, :-1] &= mask[:, 1:]
        rows, cols = np.nonzero(mask & ~inner)
        xs, ys = self.window.grid()
        return np.column_stack([xs[cols], ys[rows]])

    def _tree(self, key):
        if key not in self._trees:
            if key == "any":
                mask = self.labels >= 0
            else:
                mask = self.labels == key
            pts = self._boundary_points(mask)
            self._trees[key] = (cKDTree(pts) if len(pts) else None, mask)
        return self._trees[key]

    def distances(self, z, cid):
        """component_distance for an array of points; NaN outside the window."""
        if cid != "any":
            self.component(cid)
        tree, mask = self._tree(cid)
        z = np.asarray(z, dtype=np.complex128)
        row, col, inside = self.window.cells_of(z)
        out = np.full(z.shape, np.nan)
        floor = self.window.cell
        own = mask[row[inside], col[inside]]
        if tree is None:
            out[inside] = np.where(own, floor, np.inf)
            return out
        d, _ = tree.query(np.column_stack([z.real[inside], z.imag[inside]]))
        d = np.maximum(d, floor)
        d[own] = floor
        out[inside] = d
        return out


# ---------------------------------------------------------------- kernels


@nb.njit(cache=True)
def _apply(p, q, z):
    """R(z) on the sphere with infinity encoded as inf+0j."""
    d = p.shape[0] - 1
    if np.isinf(z.real) or np.isinf(z.imag):
        if q[d] == 0:
            return complex(np.inf, 0.0)
        return p[d] / q[d]
    if abs(z) <= 1.0:
        a = p[d]
        b = q[d]
        for i in range(d - 1, -1, -1):
            a = a * z + p[i]
            b = b * z + q[i]
    else:
        u = 1.0 / z
        a = p[0]
        b = q[0]
        for i in range(1, d + 1):
            a = a * u + p[i]
            b = b * u + q[i]
    if b == 0:
        return complex(np.inf, 0.0)
    w = a / b
    if not (np.isfinite(w.real) and np.isfinite(w.imag)):
        return complex(np.inf, 0.0)
    return w


@nb.njit(cache=True)
def _chordal(a, b):
    ai = np.isinf(a.real) or np.isinf(a.imag)
    bi = np.isinf(b.real) or np.isinf(b.imag)
    if ai and bi:
        return 0.0
    if ai:
        return 2.0 / math.hypot(1.0, abs(b))
    if bi:
        return 2.0 / math.hypot(1.0, abs(a))
    ha = math.hypot(1.0, abs(a))
    hb = math.hypot(1.0, abs(b))
    if ha > 1e150 and hb > 1e150:
        # both far out: compare in the 1/z chart
        return 2.0 * abs(1.0 / a - 1.0 / b) / (math.hypot(1.0, 1.0 / abs(a)) * math.hypot(1.0, 1.0 / abs(b)))
    return 2.0 * abs(a - b) / ha / hb


@nb.njit(cache=True)
def _classify_one(p, q, z, pts, pt_cycle, pt_index, periods, kinds, strides, dirs,
                  inf_cycle, inf_index, max_iter, tol_attr, tol_par, escape):
    ncyc = periods.shape[0]
    smax = 1
    for c in range(ncyc):
        if strides[c] > smax:
            smax = strides[c]
    hist = np.full((ncyc, smax), np.inf)
    count = np.zeros(ncyc, dtype=np.int64)
    npts = pts.shape[0]
    best = np.empty(ncyc)
    bestj = np.zeros(ncyc, dtype=np.int64)
    bestp = np.zeros(ncyc, dtype=np.int64)
    for n in range(max_iter + 1):
        zi = np.isinf(z.real) or np.isinf(z.imag)
        if inf_cycle >= 0 and (zi or abs(z) > escape):
            k = periods[inf_cycle]
            return inf_cycle, (inf_index - n) % k
        best[:] = np.inf
        for j in range(npts):
            c = pt_cycle[j]
            if kinds[c] == _KIND_SKIP:
                continue
            dist = _chordal(z, pts[j])
            if dist < best[c]:
                best[c] = dist
                bestj[c] = pt_index[j]
                bestp[c] = j
        for c in range(ncyc):
            if kinds[c] == _KIND_ATTR:
                if best[c] < tol_attr:
                    return c, (bestj[c] - n) % periods[c]
            elif kinds[c] == _KIND_PAR:
                s = strides[c]
                slot = n % s
                if n >= s:
                    if best[c] < hist[c, slot]:
                        count[c] += 1
                    else:
                        count[c] = 0
                hist[c, slot] = best[c]
                if count[c] >= MONOTONE_STEPS and best[c] < tol_par:
                    i = bestj[c]
                    k = periods[c]
                    if s == k or dirs[c, 0] == 0:
                        return c, (i - n) % k
                    # which petal: compare with the pushed-forward attracting directions
                    u = z - pts[bestp[c]]
                    tbest = i
                    score = -np.inf
                    for t in range(i, s, k):
                        v = (u * dirs[c, t].conjugate()).real
                        if v > score:
                            score = v
                            tbest = t
                    return c, (tbest - n) % s
        if n < max_iter:
            z = _apply(p, q, z)
    return -1, -1


@nb.njit(cache=True, parallel=True)
def _classify_grid(p, q, xs, ys, pts, pt_cycle, pt_index, periods, kinds, strides, dirs,
                   inf_cycle, inf_index, max_iter, tol_attr, tol_par, escape):
    n = ys.shape[0]
    m = xs.shape[0]
    cyc = np.empty((n, m), dtype=np.int32)
    ph = np.empty((n, m), dtype=np.int32)
    for r in nb.prange(n):
        for c in range(m):
            a, b = _classify_one(p, q, complex(xs[c], ys[r]), pts, pt_cycle, pt_index,
                                 periods, kinds, strides, dirs, inf_cycle, inf_index,
                                 max_iter, tol_attr, tol_par, escape)
            cyc[r, c] = a
            ph[r, c] = b
    return cyc, ph


@nb.njit(cache=True)
def _classify_points(p, q, zs, pts, pt_cycle, pt_index, periods, kinds, strides, dirs,
                     inf_cycle, inf_index, max_iter, tol_attr, tol_par, escape):
    cyc = np.empty(zs.shape[0], dtype=np.int32)
    ph = np.empty(zs.shape[0], dtype=np.int32)
    for i in range(zs.shape[0]):
        a, b = _classify_one(p, q, zs[i], pts, pt_cycle, pt_index, periods, kinds,
                             strides, dirs, inf_cycle, inf_index, max_iter, tol_attr,
                             tol_par, escape)
        cyc[i] = a
        ph[i] = b
    return cyc, ph


# ---------------------------------------------------------------- wrappers


def _tables(R, cycles):
    """Flatten cycles into the arrays the kernel wants; ids index the arrays."""
    ncyc = max((c.id for c in cycles), default=-1) + 1
    periods = np.ones(ncyc, dtype=np.int64)
    kinds = np.full(ncyc, _KIND_SKIP, dtype=np.int64)
    strides = np.ones(ncyc, dtype=np.int64)
    pts, pc, pi = [], [], []
    inf_cycle, inf_index = -1, 0
    smax = max([c.period * max(c.petals_m, 1) for c in cycles] + [1])
    dirs = np.zeros((ncyc, smax), dtype=np.complex128)
    for c in cycles:
        periods[c.id] = c.period
        if c.is_attracting:
            kinds[c.id] = _KIND_ATTR
        elif c.is_parabolic:
            kinds[c.id] = _KIND_PAR
            strides[c.id] = c.period * max(c.petals_m, 1)
            if c.petals_m > 1 and not c.contains_inf:
                dirs[c.id, : strides[c.id]] = petal_directions(R, c)
        if c.is_non_repelling and c.contains_inf:
            inf_cycle = c.id
            inf_index = next(i for i, p in enumerate(c.points) if p is INF)
        if kinds[c.id] == _KIND_SKIP:
            continue
        for i, p in enumerate(c.points):
            pts.append(complex(np.inf, 0.0) if p is INF else complex(p))
            pc.append(c.id)
            pi.append(i)
    return (
        R.num.padded(R.degree + 1),
        R.den.padded(R.degree + 1),
        np.array(pts, dtype=np.complex128),
        np.array(pc, dtype=np.int64),
        np.array(pi, dtype=np.int64),
        periods,
        kinds,
        strides,
        dirs,
        inf_cycle,
        inf_index,
    )


def petal_directions(R, cycle, radius=1e-3, samples=64):
    """Unit attracting directions of the k*m petals along a parabolic cycle.

    Entry t belongs to cycle point t mod k; entry t+1 is the image of entry t.
    """
    k, m = cycle.period, cycle.petals_m
    p0 = cycle.points[0]
    r = radius * max(1.0, abs(p0))

    def F(z):
        w = z
        for _ in range(k * m):
            w = eval_map(R, w)
        return w - z

    # coefficient b of F(p0 + u) = b u^(m+1) + ..., by a discrete Cauchy integral
    phis = 2 * np.pi * np.arange(samples) / samples
    vals = np.array([F(p0 + r * np.exp(1j * t)) for t in phis])
    b = np.mean(vals * np.exp(-1j * (m + 1) * phis)) / r ** (m + 1)
    v = np.exp(1j * (np.pi - np.angle(b)) / m)  # b v^m is negative real
    out = []
    for t in range(k * m):
        out.append(v)
        v = local_derivative(R, cycle.points[t % k]) * v
        v /= abs(v)
    return np.array(out)


def classify_orbit(R, z, cycles, max_iter=MAX_ITER, tol_attr=TOL_ATTR, tol_par=TOL_PAR,
                   escape_radius=ESCAPE_RADIUS):
    """(cycle id, phase) of the cycle the forward orbit of z settles on, or UNRESOLVED."""
    z = as_point(z)
    zs = np.array([complex(np.inf, 0.0) if z is INF else complex(z)])
    t = _tables(R, cycles)
    cyc, ph = _classify_points(*t[:2], zs, *t[2:], int(max_iter), tol_attr, tol_par, escape_radius)
    if cyc[0] < 0:
        return UNRESOLVED
    return int(cyc[0]), int(ph[0])


def classify_points(R, zs, cycles, max_iter=MAX_ITER, tol_attr=TOL_ATTR, tol_par=TOL_PAR,
                    escape_radius=ESCAPE_RADIUS):
    """Vectorized classify_orbit; returns (cycle ids, phases) with -1 for unresolved."""
    zs = np.asarray(zs, dtype=np.complex128)
    t = _tables(R, cycles)
    return _classify_points(*t[:2], zs, *t[2:], int(max_iter), tol_attr, tol_par, escape_radius)


def check_window(R, window, cycles):
    """WindowTooSmall if a finite critical point or non-repelling cycle point is outside."""
    for z, _ in critical_points(R):
        if z is not INF and not window.contains(z):
            raise WindowTooSmall(f"critical point {z} outside the window")
    for c in cycles:
        if c.kind is CycleClass.REPELLING:
            continue
        for z in c.points:
            if z is not INF and not window.contains(z):
                raise WindowTooSmall(f"cycle point {z} outside the window")


def build_atlas(R, window, cycles, max_iter=MAX_ITER, tol_attr=TOL_ATTR, tol_par=TOL_PAR,
                escape_radius=ESCAPE_RADIUS):
    check_window(R, window, cycles)
    xs, ys = window.grid()
    t = _tables(R, cycles)
    cyc, ph = _classify_grid(*t[:2], xs, ys, *t[2:], int(max_iter), tol_attr, tol_par, escape_radius)
    atlas = assemble_atlas(R, window, cycles, cyc, ph)
    atlas.params.update(
        max_iter=int(max_iter), tol_attr=tol_attr, tol_par=tol_par, escape_radius=escape_radius
    )
    return atlas


def assemble_atlas(R, window, cycles, cyc, ph):
    """Flood-fill classified cells into components."""
    n = window.resolution
    labels = np.full((n, n), UNRESOLVED, dtype=np.int32)
    by_id = {c.id: c for c in cycles}
    components = {}
    next_id = 0
    keys = sorted(set(zip(cyc[cyc >= 0].tolist(), ph[cyc >= 0].tolist())))
    for cid, phase in keys:
        blobs, count = ndimage.label((cyc == cid) & (ph == phase))
        sizes = np.bincount(blobs.ravel(), minlength=count + 1)
        edge = np.zeros(count + 1, dtype=bool)
        for side in (blobs[0, :], blobs[-1, :], blobs[:, 0], blobs[:, -1]):
            edge[side] = True
        finite = not by_id[cid].contains_inf
        for b in range(1, count + 1):
            labels[blobs == b] = next_id
            components[next_id] = Component(
                next_id, cid, phase, b - 1, bool(finite and not edge[b]), int(sizes[b]), bool(edge[b])
            )
            next_id += 1
    near = np.zeros((n, n), dtype=bool)
    near[1:, :] |= labels[1:, :] != labels[:-1, :]
    near[:-1, :] |= labels[:-1, :] != labels[1:, :]
    near[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    near[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    near &= labels != UNRESOLVED
    has_unbounded = any(
        by_id[c.cycle_id].contains_inf or c.touches_edge for c in components.values()
    )
    return FatouAtlas(
        window, labels, near, components, has_unbounded, tuple(cycles), R.fingerprint(), R
    )


def component_distance(atlas, z, cid):
    """Euclidean distance from z to the nearest cell of component ``cid`` (>= cell size)."""
    z = as_point(z)
    if not atlas.window.contains(z):
        raise OutOfWindow(f"{z} lies outside the window")
    return float(atlas.distances(np.array([complex(z)]), cid)[0])


def component_containing(atlas, cycle, point):
    """Id of the component whose cell holds ``point`` and whose key is on ``cycle``."""
    cid = atlas.component_at(point)
    if atlas.components[cid].cycle_id != cycle.id:
        raise UnknownComponent(f"cell at {point} belongs to another cycle")
    return cid


# ---------------------------------------------------------------- polynomial tests


def default_escape_radius(R):
    """Past this modulus every orbit of the polynomial escapes."""
    c = R.as_polynomial_coeffs()
    d = len(c) - 1
    s = float(np.sum(np.abs(c[:d])))
    return max(2.0, (s + 2.0) / abs(c[d]))


def critical_escape(R, max_iter=1000, escape_radius=None):
    """Per finite critical point: True escaped, False bounded, None undecided."""
    if not R.is_polynomial:
        raise NotAPolynomial("map is not a polynomial")
    rad = default_escape_radius(R) if escape_radius is None else float(escape_radius)
    out = []
    for c, _ in critical_points(R):
        if c is INF:
            continue
        z = c
        top = 0.0
        state = False
        for i in range(max_iter):
            z = eval_map(R, z)
            if z is INF or abs(z) > rad:
                state = True
                break
            if i >= max_iter * 9 // 10:
                top = max(top, abs(z))
        if state is False and top > 0.5 * rad:
            state = None
        out.append((c, state))
    return out


def connectivity_of_J_polynomial(R, max_iter=1000, escape_radius=None):
    """CONNECTED, DISCONNECTED or UNKNOWN from the critical orbits."""
    states = [s for _, s in critical_escape(R, max_iter, escape_radius)]
    if any(s is True for s in states):
        return "DISCONNECTED"
    if any(s is None for s in states):
        return "UNKNOWN"
    return "CONNECTED"


# ---------------------------------------------------------------- invariance


def _membership(R, atlas, cid, z, near=None, margin=2):
    """Whether z belongs to component ``cid``.

    Inside the window the cell label decides, except in the band of ``margin``
    cells around the Julia set, where a cell centre can sit on the wrong side of
    a thin piece of J; there the orbit of z itself is classified and must match
    the component's key with the component within reach.  Off-window points
    match by key when the component reaches the window edge.
    """
    comp = atlas.components[cid]
    key = (comp.cycle_id, comp.phase)
    if z is not INF and atlas.window.contains(z):
        r, c = atlas.window.cell_of(z)
        lab = int(atlas.labels[r, c])
        if lab >= 0 and (near is None or not near[r, c]):
            return lab == cid
        if classify_orbit(R, z, atlas.cycles, **atlas.params) != key:
            return False
        r0, r1 = max(r - margin - 1, 0), r + margin + 2
        c0, c1 = max(c - margin - 1, 0), c + margin + 2
        return bool((atlas.labels[r0:r1, c0:c1] == cid).any())
    k = classify_orbit(R, z, atlas.cycles, **atlas.params)
    if k == UNRESOLVED:
        return False
    return k == key and comp.touches_edge


def complete_invariance_check(R, atlas, cid, n_probes=200, seed=0, margin=2):
    """Forward image and all preimages of random interior cells stay in the component."""
    atlas.component(cid)
    mask = atlas.labels == cid
    near = ndimage.binary_dilation(atlas.julia_near, iterations=margin)
    rows, cols = np.nonzero(mask & ~near)
    if len(rows) == 0:
        return False
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(rows), size=min(n_probes, len(rows)), replace=False)
    for i in pick:
        z = atlas.window.center_of(rows[i], cols[i])
        images = [eval_map(R, z)] + preimages(R, z).points()
        if not all(_membership(R, atlas, cid, w, near, margin) for w in images):
            return False
    return True


# ---------------------------------------------------------------- dump


_MAGIC = b"MMEATLS1"


def write_atlas(atlas, path):
    """Binary dump: magic, window (3 float64), resolution (int32), labels, component table."""
    w = atlas.window
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<dddi", w.center.real, w.center.imag, w.half_width, w.resolution))
        fh.write(atlas.dump_labels().astype("<i4").tobytes(order="C"))
        fh.write(struct.pack("<i", len(atlas.components)))
        for c in atlas.components.values():
            fh.write(struct.pack("<iiiii", c.id, c.cycle_id, c.phase, c.blob, int(c.bounded)))


def read_atlas(path):
    """Returns (window, labels, table) where table maps id -> (cycle, phase, blob, bounded)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != _MAGIC:
        raise ValueError("not an atlas dump")
    cx, cy, hw, res = struct.unpack_from("<dddi", data, 8)
    off = 8 + struct.calcsize("<dddi")
    labels = np.frombuffer(data, dtype="<i4", count=res * res, offset=off).reshape(res, res)
    off += 4 * res * res
    table = {}
    if off < len(data):
        (count,) = struct.unpack_from("<i", data, off)
        off += 4
        for _ in range(count):
            i, c, p, b, bd = struct.unpack_from("<iiiii", data, off)
            off += 20
            table[i] = (c, p, b, bool(bd))
    return GridWindow(complex(cx, cy), hw, res), labels.copy(), table
