"""Acceptance criteria 1-12, one test each (7 is split by map).

Every test records a PASS/FAIL line that pytest prints in the terminal
summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest

from conftest import lab
from mme_lab import measure as ms
from mme_lab.atlas import complete_invariance_check, connectivity_of_J_polynomial
from mme_lab.cycles import CycleClass, cycle_containing, find_cycles, multiplier
from mme_lab.errors import EpsilonBelowResolution
from mme_lab.maps import INF, RationalMap, critical_points, preimages
from mme_lab.rays import COLAND, DISTINCT, colanding_pair, cut_point_probes, trace_ray
from mme_lab.sampler import invariance_check, sample_backward

P = np.polynomial.polynomial
BASILICA = RationalMap.from_coeffs([-1, 0, 1])
SQUARE = RationalMap.from_coeffs([0, 0, 1])
E1 = RationalMap.from_coeffs([1, 1.5, 1], [0, 1])
E2 = RationalMap.from_coeffs([0, -1, 1], [1, 2])
CUBIC = RationalMap.from_coeffs([3, -3, 0, 1])


def _unbounded(atlas):
    return max((c for c in atlas.components.values() if not c.bounded), key=lambda c: c.size).id


def test_01_example2_multipliers(record):
    t = time.perf_counter()
    cyc = find_cycles(E2, 1)
    errs = []
    for p, mu in ((-2, 1 / 3), (0, -1), (INF, 2)):
        c = cycle_containing(cyc, p, 1e-9)
        errs.append(math.inf if c is None else abs(multiplier(E2, c.points) - mu))
    dt = time.perf_counter() - t
    ok = len(cyc) == 3 and max(errs) < 1e-9 and dt < 1
    record(1, ok, f"fixed points -2, 0, inf; max multiplier error {max(errs):.1e}; {dt:.2f} s")
    assert ok


def test_02_example1_structure(record):
    t = time.perf_counter()
    crit = sorted(z.real for z, _ in critical_points(E1).roots if z is not INF)
    cyc = find_cycles(E1, 2)
    two = cycle_containing(cyc, -1, 1e-9)
    par = cycle_containing(cyc, INF)
    dt = time.perf_counter() - t
    ok = (
        np.allclose(crit, [-1, 1], atol=1e-12)
        and two is not None and two.period == 2
        and any(abs(p + 0.5) < 1e-9 for p in two.points)
        and abs(two.multiplier) < 1e-9
        and par is not None and par.kind is CycleClass.PARABOLIC
        and abs(par.multiplier - 1) < 1e-9
        and dt < 1
    )
    record(2, ok, f"critical {crit}, 2-cycle |mu| {abs(two.multiplier):.1e}, "
                  f"|mu_inf - 1| {abs(par.multiplier - 1):.1e}; {dt:.2f} s")
    assert ok


def test_03_map_classification(record):
    out = {}
    times = []
    for name, R in (("basilica", BASILICA), ("example1", E1), ("example2", E2)):
        t = time.perf_counter()
        out[name] = ms.classify_map(R, find_cycles(R, 4))
        times.append(time.perf_counter() - t)
    ok = (
        out["basilica"].verdict == ms.HYPERBOLIC
        and all(out[n].verdict == ms.GEOMETRICALLY_FINITE for n in ("example1", "example2"))
        and not any(out[n].is_hyperbolic or out[n].is_subhyperbolic for n in ("example1", "example2"))
        and max(times) < 10
    )
    record(3, ok, ", ".join(f"{n} {v.verdict}" for n, v in out.items()) + f"; max {max(times):.2f} s")
    assert ok


def test_04_square_sanity(record):
    t = time.perf_counter()
    n = 100_000
    s = sample_backward(SQUARE, 2.0, burn_in=100, n=n, rng_seed=1)
    radial = np.max(np.abs(np.abs(s.points) - 1))
    ang = np.sort(np.mod(np.angle(s.points) / (2 * np.pi), 1.0))
    i = np.arange(1, n + 1)
    ks = max(np.max(i / n - ang), np.max(ang - (i - 1) / n))
    dt = time.perf_counter() - t
    ok = radial < 1e-6 and ks < 3 / math.sqrt(n) and dt < 30
    record(4, ok, f"max ||z|-1| {radial:.1e}, KS {ks:.4f} < {3 / math.sqrt(n):.4f}; {dt:.1f} s")
    assert ok


def test_05_invariance(record):
    worst = []
    for name in ("basilica", "parabolic2", "example2", "cubic"):
        L = lab(name, 1024)
        res = invariance_check(L.samples, L.S)
        worst.append((name, max(d / t for d, t in res)))
    ok = all(r <= 1 for _, r in worst) and all(lab(n, 1024).samples.n == 100_000 for n, _ in worst)
    record(5, ok, "max delta/threshold " + ", ".join(f"{n} {r:.3f}" for n, r in worst))
    assert ok


def test_06_dichotomy_ladder(record):
    t = time.perf_counter()
    ladder = (0.05, 0.02, 0.01)
    problems = []
    notes = []
    for res in (512, 1024, 2048):
        L = lab("basilica", res)
        a = L.atlas
        runs = [L.samples, sample_backward(L.S, None, 100, 100_000, 2)]
        # a rung needs epsilon >= 2 cells; at 512 the 0.01 rung is refused
        rungs = [e for e in ladder if e >= 2 * a.window.cell]
        for e in ladder:
            if e not in rungs:
                with pytest.raises(EpsilonBelowResolution):
                    ms.boundary_measure(runs[0], a, _unbounded(a), e)
        unb = _unbounded(a)
        for s in runs:
            for e in rungs:
                v = ms.boundary_measure(s, a, unb, e).estimate
                if v < 0.99:
                    problems.append(f"res {res} unbounded {v:.3f} at {e}")
        for p in (0.0, -1.0):
            cid = a.component_at(p)
            per_seed = [[ms.boundary_measure(s, a, cid, e) for e in rungs] for s in runs]
            for ests in per_seed:
                vals = [x.estimate for x in ests]
                if not all(x > y for x, y in zip(vals, vals[1:])):
                    problems.append(f"res {res} comp {p} not decreasing {vals}")
            for x, y in zip(*per_seed):
                if not ms.overlap(x.ci95, y.ci95):
                    problems.append(f"res {res} comp {p} eps {x.epsilon} seeds disagree")
            notes.append(f"{res}:{p:+.0f} " + "/".join(f"{x.estimate:.3f}" for x in per_seed[0]))
        if len(rungs) == 3:
            rep = ms.dichotomy_report(runs[0], a, ladder)
            w = rep.winners()
            if len(w) != 1 or a.components[w[0]].bounded:
                problems.append(f"res {res} winners {w}")
    dt = time.perf_counter() - t
    ok = not problems and dt < 300
    record(6, ok, ("; ".join(problems) or "bounded " + " ".join(notes)) + f"; {dt:.0f} s")
    assert ok


def _grand_orbit(name, points, record, num):
    L = lab(name, 1024)
    a = L.atlas
    cids = [a.component_at(L.M(p)) for p in points]
    r = ms.grand_orbit_equality(L.samples, a, cids, 0.02)
    est = ", ".join(f"{e.estimate:.4f} [{e.ci95[0]:.4f}, {e.ci95[1]:.4f}]" for e in r.estimates)
    record(num, r.passed, f"{name} {est}; max difference {r.max_difference:.4f}")
    return r


def test_07a_grand_orbit_basilica(record):
    r = _grand_orbit("basilica", (0.0, -1.0), record, "7a")
    assert r.passed


@pytest.mark.xfail(strict=True, reason="epsilon-neighbourhood masses differ at fixed epsilon (chart distortion plus a genuine gap); see notes/decisions.md")
def test_07b_grand_orbit_example1(record):
    # O1 and O2 are the components of -1 and -1/2, shown in the chart w = 1/(z + 2)
    r = _grand_orbit("parabolic2", (-1.0, -0.5), record, "7b")
    assert r.passed


def test_08_residual_mass(record):
    vals = {}
    for name in ("basilica", "parabolic2", "example2", "cubic"):
        L = lab(name, 1024)
        vals[name] = ms.residual_mass(L.samples, L.atlas, 0.02).estimate
    ok = all(v < 0.01 for v in vals.values())
    record(8, ok, ", ".join(f"{n} {v:.4f}" for n, v in vals.items()))
    assert ok


def test_09_complete_invariance(record):
    B = lab("basilica", 512)
    a = B.atlas
    unb = complete_invariance_check(B.S, a, _unbounded(a), 200)
    zero = complete_invariance_check(B.S, a, a.component_at(0.0), 200)
    E = lab("example2", 512)
    attr = cycle_containing(E.cycles, E.M(-2))
    cid = next(c for c in ms.principal_components(E.atlas) if E.atlas.components[c].cycle_id == attr.id)
    e2 = complete_invariance_check(E.S, E.atlas, cid, 200)
    ok = unb and e2 and not zero
    record(9, ok, f"basilica unbounded {unb}, example2 -2 component {e2}, basilica 0 component {zero}")
    assert ok


def test_10_rays(record):
    t = time.perf_counter()
    alpha = min(np.roots([1, -1, -1]), key=abs).real
    v, z = colanding_pair(BASILICA, "1/3", "2/3")
    colands = v == COLAND and abs(z - alpha) < 1e-6
    a = lab("basilica", 1024).atlas
    labels, _ = cut_point_probes(a, trace_ray(BASILICA, "1/3"), trace_ray(BASILICA, "2/3"), alpha)
    split = min(labels) >= 0 and a.components[labels[0]].blob != a.components[labels[1]].blob
    v2, pts = colanding_pair(SQUARE, 0, "1/2")
    distinct = v2 == DISTINCT and abs(pts[0] - 1) < 1e-6 and abs(pts[1] + 1) < 1e-6
    dt = time.perf_counter() - t
    ok = colands and split and distinct and dt < 30
    record(10, ok, f"1/3,2/3 {v} at {z.real:.10f}; probe blobs differ {split}; z^2 0,1/2 {v2}; {dt:.1f} s")
    assert ok


def test_11_cubic_class(record):
    # oracle for the critical orbits: 1 is fixed, -1 -> 5 -> 113 -> ... escapes
    L = lab("cubic", 1024)
    conn = connectivity_of_J_polynomial(CUBIC)
    cls = ms.classify_map(CUBIC, find_cycles(CUBIC, 4))
    escaping = sum(d.escapes for d in cls.dispositions)
    rep = ms.dichotomy_report(L.samples, L.atlas)
    w = rep.winners()
    ok = conn == "DISCONNECTED" and escaping == 1 and len(w) == 1 and not L.atlas.components[w[0]].bounded
    record(11, ok, f"{conn}, {escaping} escaping critical orbit, winners {len(w)} (unbounded)")
    assert ok


# --------------------------------------------------------------- criterion 12 oracle


def _oracle_roots(ascending):
    """numpy.roots on the companion matrix, with near-equal roots merged by their mean."""
    c = np.trim_zeros(np.asarray(ascending, dtype=complex)[::-1], "f")
    groups = []
    for z in np.roots(c):
        for g in groups:
            if abs(np.mean(g) - z) < 1e-4:
                g.append(z)
                break
        else:
            groups.append([z])
    return [complex(np.mean(g)) for g in groups]


def _oracle_iterate(num, den, k):
    """Numerator and denominator of R^k by direct homogeneous substitution."""
    d = max(len(num), len(den)) - 1
    n = np.pad(np.asarray(num, complex), (0, d + 1 - len(num)))
    q = np.pad(np.asarray(den, complex), (0, d + 1 - len(den)))
    N, D = np.array([0, 1], complex), np.array([1], complex)
    for _ in range(k):
        def hom(c):
            out = np.zeros(1, complex)
            for i in range(d + 1):
                out = P.polyadd(out, c[i] * P.polymul(P.polypow(N, i), P.polypow(D, d - i)))
            return out
        N, D = hom(n), hom(q)
    return N, D


def _set_distance(a, b):
    if len(a) != len(b):
        return math.inf
    return max(max(min(abs(x - y) for y in b) for x in a), max(min(abs(x - y) for x in a) for y in b))


DEGREE_TWO = {
    "basilica": ([-1, 0, 1], [1]),
    "parabolic2": ([1, 1.5, 1], [0, 1]),
    "example2": ([0, -1, 1], [1, 2]),
    "circle": ([0, 0, 1], [1]),
}


def test_12_oracle_equivalence(record):
    worst = 0.0
    rng = np.random.default_rng(12)
    for name, (num, den) in DEGREE_TWO.items():
        R = RationalMap.from_coeffs(num, den)
        for w in list(rng.normal(size=5) + 1j * rng.normal(size=5)) + [0j, -1 + 0j]:
            got = [z for z, _ in preimages(R, w).roots if z is not INF]
            want = _oracle_roots(P.polysub(num, np.multiply(den, w)))
            worst = max(worst, _set_distance(got, want))
        cyc = find_cycles(R, 3)
        for k in (1, 2, 3):
            N, D = _oracle_iterate(num, den, k)
            want = _oracle_roots(P.polysub(N, P.polymul(D, [0, 1])))
            got = [p for c in cyc if k % c.period == 0 for p in c.points if p is not INF]
            worst = max(worst, _set_distance(got, want))
    ok = worst < 1e-9
    record(12, ok, f"preimages and periodic points vs numpy.roots, max distance {worst:.1e}")
    assert ok
