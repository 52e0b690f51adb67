"""Boundary-measure estimates from MME samples and a Fatou atlas."""

import math
from dataclasses import dataclass, field

import numpy as np

from .atlas import (
    TOL_ATTR,
    UNRESOLVED,
    _membership,
    classify_orbit,
)
from .cycles import CycleClass
from .errors import EpsilonBelowResolution, NotAForwardCycle
from .maps import INF, chordal, critical_points, eval_map

RESIDUAL = "RESIDUAL"
Z95 = 1.959963984540054

BOUNDARY_IS_J = "BOUNDARY_IS_J_CANDIDATE"
MEASURE_ZERO = "MEASURE_ZERO_CANDIDATE"
AMBIGUOUS = "AMBIGUOUS"

J_THRESHOLD = 0.99
ZERO_THRESHOLD = 0.2
DEFAULT_LADDER = (0.05, 0.02, 0.01)


def wilson(k, n, z=Z95):
    """Wilson score interval for k successes in n trials."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # clamp so rounding never puts the point estimate outside its own interval
    return min(max(0.0, mid - half), p), max(min(1.0, mid + half), p)


@dataclass(frozen=True)
class MeasureEstimate:
    component: object
    epsilon: float
    estimate: float
    ci95: tuple
    n: int
    outside: int = 0  # samples outside the window, not in n

    def to_dict(self):
        return {
            "component": self.component,
            "epsilon": self.epsilon,
            "estimate": self.estimate,
            "ci95": list(self.ci95),
            "n": self.n,
            "outside_window": self.outside,
        }


def _points(samples):
    return samples.points if hasattr(samples, "points") else np.asarray(samples, dtype=np.complex128)


def _check(samples, atlas, epsilon):
    if epsilon < 2 * atlas.window.cell:
        raise EpsilonBelowResolution(
            f"epsilon {epsilon} below twice the cell size {atlas.window.cell:.3g}"
        )
    fp = getattr(samples, "map_fingerprint", None)
    if fp is not None and atlas.map_fingerprint and fp != atlas.map_fingerprint:
        raise ValueError("samples and atlas come from different maps")


def _estimate(label, dist, epsilon, below):
    inside = ~np.isnan(dist)
    n = int(inside.sum())
    d = dist[inside]
    k = int(np.sum(d < epsilon)) if below else int(np.sum(d >= epsilon))
    est = k / n if n else 0.0
    return MeasureEstimate(label, float(epsilon), est, wilson(k, n), n, int((~inside).sum()))


def boundary_measure(samples, atlas, cid, epsilon):
    """Fraction of samples within ``epsilon`` of component ``cid``."""
    _check(samples, atlas, epsilon)
    return _estimate(cid, atlas.distances(_points(samples), cid), epsilon, True)


def residual_mass(samples, atlas, epsilon):
    """Fraction of samples at distance >= epsilon from every labeled cell."""
    _check(samples, atlas, epsilon)
    return _estimate(RESIDUAL, atlas.distances(_points(samples), "any"), epsilon, False)


def overlap(a, b):
    return a[0] <= b[1] and b[0] <= a[1]


@dataclass(frozen=True)
class GrandOrbitResult:
    components: tuple
    epsilon: float
    estimates: tuple
    max_difference: float
    passed: bool

    def to_dict(self):
        return {
            "components": list(self.components),
            "epsilon": self.epsilon,
            "estimates": [e.to_dict() for e in self.estimates],
            "max_difference": self.max_difference,
            "pass": self.passed,
        }


def _probe_cells(atlas, cid, n, seed=0, margin=2):
    from scipy import ndimage

    near = ndimage.binary_dilation(atlas.julia_near, iterations=margin)
    rows, cols = np.nonzero((atlas.labels == cid) & ~near)
    if len(rows) == 0:
        rows, cols = np.nonzero(atlas.labels == cid)
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(rows), size=min(n, len(rows)), replace=False)
    return [atlas.window.center_of(rows[i], cols[i]) for i in pick]


def verify_forward_cycle(atlas, cids, n_probes=20):
    """Check that R permutes the listed components cyclically; raise otherwise."""
    R = atlas.rmap
    cids = list(cids)
    image = {}
    for c in cids:
        hits = {}
        for z in _probe_cells(atlas, c, n_probes):
            w = eval_map(R, z)
            for t in cids:
                if _membership(R, atlas, t, w):
                    hits[t] = hits.get(t, 0) + 1
                    break
        if not hits:
            raise NotAForwardCycle(f"image of component {c} is not among the listed components")
        image[c] = max(hits, key=hits.get)
    # one cycle through every listed component
    seen = [cids[0]]
    while True:
        nxt = image[seen[-1]]
        if nxt == cids[0]:
            break
        if nxt in seen:
            raise NotAForwardCycle("components do not form a single forward cycle")
        seen.append(nxt)
    if len(seen) != len(cids):
        raise NotAForwardCycle("components do not form a single forward cycle")
    return image


def grand_orbit_equality(samples, atlas, cids, epsilon, verify=True):
    """Pass iff all pairwise Wilson intervals of the boundary estimates overlap."""
    cids = tuple(cids)
    if len(cids) <= 1:
        ests = tuple(boundary_measure(samples, atlas, c, epsilon) for c in cids)
        return GrandOrbitResult(cids, float(epsilon), ests, 0.0, True)
    if verify:
        verify_forward_cycle(atlas, cids)
    ests = tuple(boundary_measure(samples, atlas, c, epsilon) for c in cids)
    diff = 0.0
    ok = True
    for i in range(len(ests)):
        for j in range(i + 1, len(ests)):
            diff = max(diff, abs(ests[i].estimate - ests[j].estimate))
            ok = ok and overlap(ests[i].ci95, ests[j].ci95)
    return GrandOrbitResult(cids, float(epsilon), ests, diff, ok)


def principal_components(atlas, radius_cells=2):
    """Components that touch a non-repelling cycle point (or hold infinity's side).

    Attracting points pick the blob containing them; parabolic points pick, for
    each phase, the largest blob within ``radius_cells`` of the point; cycles
    through infinity pick the largest edge-touching blob of the right phase.
    """
    out = []
    by_cycle = {}
    for comp in atlas.components.values():
        by_cycle.setdefault(comp.cycle_id, []).append(comp)
    for cyc in atlas.cycles:
        comps = by_cycle.get(cyc.id, [])
        if not comps or not cyc.is_non_repelling:
            continue
        for idx, p in enumerate(cyc.points):
            if p is INF:
                edge = [c for c in comps if c.touches_edge]
                for phase in sorted({c.phase for c in edge}):
                    out.append(max((c for c in edge if c.phase == phase), key=lambda c: c.size).id)
                continue
            if not atlas.window.contains(p):
                continue
            if cyc.is_attracting:
                lab = atlas.label_at(p)
                if lab >= 0 and atlas.components[lab].cycle_id == cyc.id:
                    out.append(lab)
                continue
            lim = radius_cells * atlas.window.cell * 1.5
            near = [c for c in comps if atlas.distances(np.array([p]), c.id)[0] <= lim]
            for phase in sorted({c.phase for c in near}):
                out.append(max((c for c in near if c.phase == phase), key=lambda c: c.size).id)
    seen = set()
    return [c for c in out if not (c in seen or seen.add(c))]


def component_anchor(atlas, cid):
    """A cell center deep inside the component (farthest from its edge)."""
    from scipy import ndimage

    mask = atlas.labels == cid
    depth = ndimage.distance_transform_cdt(np.pad(mask, 1), metric="taxicab")[1:-1, 1:-1]
    r, c = np.unravel_index(int(np.argmax(depth)), depth.shape)
    return atlas.window.center_of(r, c)


@dataclass
class DichotomyReport:
    ladder: tuple
    rows: list = field(default_factory=list)  # (component id, [MeasureEstimate], verdict)
    warnings: list = field(default_factory=list)

    def verdict(self, cid):
        for c, _, v in self.rows:
            if c == cid:
                return v
        raise KeyError(cid)

    def winners(self):
        return [c for c, _, v in self.rows if v == BOUNDARY_IS_J]

    def to_list(self):
        return [
            {
                "component": c,
                "estimates": [e.estimate for e in ests],
                "epsilons": [e.epsilon for e in ests],
                "verdict": v,
            }
            for c, ests, v in self.rows
        ]


def dichotomy_verdict(values):
    if all(v >= J_THRESHOLD for v in values):
        return BOUNDARY_IS_J
    if all(a > b for a, b in zip(values, values[1:])) and values[-1] < ZERO_THRESHOLD:
        return MEASURE_ZERO
    return AMBIGUOUS


def dichotomy_report(samples, atlas, ladder=DEFAULT_LADDER, components=None):
    """Per-component verdicts from estimates along a decreasing epsilon ladder.

    ``atlas`` may be a single atlas or one atlas per rung (finer atlases for
    smaller epsilons); components are then matched through ``components``,
    given as points that lie inside each component.
    """
    ladder = tuple(float(e) for e in ladder)
    if len(ladder) < 3 or any(a <= b for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder needs at least 3 strictly decreasing epsilons")
    atlases = list(atlas) if isinstance(atlas, (list, tuple)) else [atlas] * len(ladder)
    if len(atlases) != len(ladder):
        raise ValueError("one atlas per rung expected")
    base = atlases[-1]
    if components is None:
        anchors = {c: component_anchor(base, c) for c in principal_components(base)}
    else:
        anchors = {}
        for z in components:
            anchors[base.component_at(z)] = z
    rep = DichotomyReport(ladder)
    for cid, z in anchors.items():
        ests = []
        for eps, a in zip(ladder, atlases):
            local = cid if a is base else a.component_at(z)
            ests.append(boundary_measure(samples, a, local, eps))
        rep.rows.append((cid, ests, dichotomy_verdict([e.estimate for e in ests])))
    if len(rep.winners()) > 1 and len(base.components) > 2:
        rep.warnings.append(
            f"{len(rep.winners())} components look like their boundary carries all of the measure"
        )
    return rep


# ---------------------------------------------------------------- map classification

F_ATTRACTED = "F-ATTRACTED"
J_PERIODIC = "J-EVENTUALLY-PERIODIC"
PARABOLIC_ATTRACTED = "PARABOLIC-ATTRACTED"
UNRESOLVED_DISP = "UNRESOLVED"

LANDING_TOL = 1e-9
LANDING_STEPS = 200

HYPERBOLIC = "HYPERBOLIC"
SUBHYPERBOLIC = "SUBHYPERBOLIC"
GEOMETRICALLY_FINITE = "GEOMETRICALLY_FINITE"
UNDETERMINED = "UNDETERMINED"


@dataclass(frozen=True)
class Disposition:
    point: object
    multiplicity: int
    kind: str
    cycle_id: int = -1
    escapes: bool = False

    def to_dict(self):
        return {
            "point": "inf" if self.point is INF else [self.point.real, self.point.imag],
            "multiplicity": self.multiplicity,
            "disposition": self.kind,
            "cycle": self.cycle_id,
            "escapes": self.escapes,
        }


@dataclass(frozen=True)
class MapClassification:
    verdict: str
    dispositions: tuple
    notes: tuple = ()

    @property
    def is_hyperbolic(self):
        return self.verdict == HYPERBOLIC

    @property
    def is_subhyperbolic(self):
        return self.verdict in (HYPERBOLIC, SUBHYPERBOLIC)

    @property
    def is_geometrically_finite(self):
        return self.verdict in (HYPERBOLIC, SUBHYPERBOLIC, GEOMETRICALLY_FINITE)

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "critical_points": [d.to_dict() for d in self.dispositions],
            "notes": list(self.notes),
        }


def _lands(R, c, cycles):
    """Cycle id if the orbit of c lands on a repelling/parabolic cycle and stays there."""
    targets = [cy for cy in cycles if cy.kind in (CycleClass.REPELLING, CycleClass.PARABOLIC)]
    z = c
    for _ in range(LANDING_STEPS):
        for cy in targets:
            for p in cy.points:
                if chordal(z, p) < LANDING_TOL:
                    w = z
                    ok = True
                    for _ in range(3 * cy.period):
                        w = eval_map(R, w)
                        if min(chordal(w, q) for q in cy.points) >= LANDING_TOL:
                            ok = False
                            break
                    if ok:
                        return cy.id
        z = eval_map(R, z)
    return None


def classify_map(R, cycles, max_iter=1_000_000, tol_par=1e-3):
    """Verdict from the fate of every critical orbit."""
    if not cycles:
        raise ValueError("cycles are required")
    by_id = {c.id: c for c in cycles}
    disp = []
    for c, m in critical_points(R):
        landed = _lands(R, c, cycles)
        if landed is not None:
            disp.append(Disposition(c, m, J_PERIODIC, landed))
            continue
        key = classify_orbit(R, c, cycles, max_iter=max_iter, tol_attr=TOL_ATTR, tol_par=tol_par)
        if key == UNRESOLVED:
            disp.append(Disposition(c, m, UNRESOLVED_DISP))
            continue
        cyc = by_id[key[0]]
        kind = PARABOLIC_ATTRACTED if cyc.is_parabolic else F_ATTRACTED
        escapes = c is not INF and cyc.contains_inf and cyc.is_attracting
        disp.append(Disposition(c, m, kind, cyc.id, escapes))
    kinds = {d.kind for d in disp}
    notes = []
    if UNRESOLVED_DISP in kinds:
        verdict = UNDETERMINED
    elif kinds <= {F_ATTRACTED}:
        verdict = HYPERBOLIC
    elif kinds <= {F_ATTRACTED, J_PERIODIC}:
        verdict = SUBHYPERBOLIC
    else:
        verdict = GEOMETRICALLY_FINITE
        notes.append(
            "a critical point in F converges to a parabolic cycle; such maps are"
            " counted as geometrically finite but not subhyperbolic"
        )
    return MapClassification(verdict, tuple(disp), tuple(notes))


__all__ = [
    "MeasureEstimate",
    "GrandOrbitResult",
    "DichotomyReport",
    "MapClassification",
    "Disposition",
    "wilson",
    "boundary_measure",
    "residual_mass",
    "grand_orbit_equality",
    "verify_forward_cycle",
    "principal_components",
    "dichotomy_report",
    "dichotomy_verdict",
    "classify_map",
]
