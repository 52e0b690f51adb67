import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mme_lab.cycles import Cycle, CycleClass, classify, cycle_containing, find_cycles, multiplier
from mme_lab.maps import INF, RationalMap, chordal, eval_map

BASILICA = RationalMap.from_coeffs([-1, 0, 1])
SQUARE = RationalMap.from_coeffs([0, 0, 1])
E1 = RationalMap.from_coeffs([1, 1.5, 1], [0, 1])
E2 = RationalMap.from_coeffs([0, -1, 1], [1, 2])
PHI = (1 + 5**0.5) / 2


def _find(cycles, point, tol=1e-9):
    c = cycle_containing(cycles, point, tol)
    assert c is not None, f"no cycle through {point}"
    return c


def test_basilica_cycles():
    cyc = find_cycles(BASILICA, 2)
    fixed = sorted((c for c in cyc if c.period == 1), key=lambda c: (c.points[0] is INF, str(c.points[0])))
    assert len(fixed) == 3
    _find(cyc, PHI)
    _find(cyc, 1 - PHI)
    _find(cyc, INF)
    two = _find(cyc, 0.0)
    assert two.period == 2 and any(abs(p + 1) < 1e-12 for p in two.points)
    assert len([c for c in cyc if c.period == 2]) == 1


def test_example2_fixed_points():
    cyc = find_cycles(E2, 1)
    assert len(cyc) == 3
    assert abs(_find(cyc, -2).multiplier - 1 / 3) < 1e-9
    assert abs(_find(cyc, 0).multiplier + 1) < 1e-9
    assert abs(_find(cyc, INF).multiplier - 2) < 1e-9


def test_example1_cycles():
    cyc = find_cycles(E1, 2)
    two = _find(cyc, -1)
    assert two.period == 2 and any(abs(p + 0.5) < 1e-12 for p in two.points)
    assert two.kind is CycleClass.SUPERATTRACTING
    par = _find(cyc, INF)
    assert par.kind is CycleClass.PARABOLIC and par.petals_m == 1
    assert abs(par.multiplier - 1) < 1e-9


def test_multiplier_examples():
    assert abs(multiplier(BASILICA, (0j, -1 + 0j))) < 1e-15
    assert abs(multiplier(E2, (-2 + 0j,)) - 1 / 3) < 1e-12
    assert abs(multiplier(E2, (0j,)) + 1) < 1e-12
    assert abs(multiplier(E2, (INF,)) - 2) < 1e-12
    assert abs(multiplier(E1, (INF,)) - 1) < 1e-12


def test_classify_examples():
    assert classify(0) == (CycleClass.SUPERATTRACTING, 0)
    assert classify(-1) == (CycleClass.PARABOLIC, 2)
    assert classify(1) == (CycleClass.PARABOLIC, 1)
    assert classify(1 / 3)[0] is CycleClass.ATTRACTING
    assert classify(2)[0] is CycleClass.REPELLING
    assert classify(cmath.exp(2j * math.pi * 2 ** 0.5))[0] is CycleClass.NEUTRAL_OTHER
    assert classify(cmath.exp(2j * math.pi * 3 / 7)) == (CycleClass.PARABOLIC, 7)


@pytest.mark.parametrize("R,k", [(BASILICA, 4), (E1, 4), (E2, 4), (RationalMap.from_coeffs([3, -3, 0, 1]), 3)])
def test_cycle_invariants(R, k):
    for c in find_cycles(R, k):
        pts = c.points
        for i, p in enumerate(pts):
            assert chordal(eval_map(R, p), pts[(i + 1) % len(pts)]) < 1e-8
        # minimal period
        for j in range(1, len(pts)):
            if len(pts) % j == 0:
                w = pts[0]
                for _ in range(j):
                    w = eval_map(R, w)
                assert chordal(w, pts[0]) > 1e-7
        assert classify(c.multiplier)[0] is c.kind


def _exact_period_count(k):
    """Orbits of exact period k for z^2 on the unit circle: roots of z^(2^k - 1) = 1."""
    n = 2**k - 1
    pts = [cmath.exp(2j * math.pi * j / n) for j in range(n)]
    exact = 0
    for z in pts:
        w = z
        per = None
        for i in range(1, k + 1):
            w = w * w
            if abs(w - z) < 1e-9:
                per = i
                break
        if per == k:
            exact += 1
    return exact // k


@pytest.mark.parametrize("k", [1, 2, 3])
def test_square_cycle_counts(k):
    cyc = find_cycles(SQUARE, 3)
    finite_k = [c for c in cyc if c.period == k and not c.contains_inf and abs(c.points[0]) > 0.5]
    assert len(finite_k) == _exact_period_count(k)
    for c in finite_k:
        for p in c.points:
            assert abs(p ** (2**k) - p) < 1e-9


@given(st.integers(0, 5))
def test_classification_invariant_under_rotation(shift):
    cyc = [c for c in find_cycles(BASILICA, 4) if c.period == 4]
    for c in cyc:
        s = shift % c.period
        rot = c.points[s:] + c.points[:s]
        assert classify(multiplier(BASILICA, rot))[0] is c.kind


def test_ids_are_sequential():
    cyc = find_cycles(E2, 3)
    assert [c.id for c in cyc] == list(range(len(cyc)))


def test_k_max_bounds():
    with pytest.raises(ValueError):
        find_cycles(BASILICA, 0)
    with pytest.raises(ValueError):
        find_cycles(BASILICA, 7)


def test_cycle_json():
    c = _find(find_cycles(E2, 1), INF)
    d = c.to_dict()
    assert d["points"] == ["inf"] and d["class"] == "REPELLING"
    par = _find(find_cycles(E2, 1), 0)
    assert par.to_dict()["class"] == "PARABOLIC(2)"


def test_cycle_dataclass_properties():
    c = Cycle((0j,), 0j, CycleClass.SUPERATTRACTING)
    assert c.is_attracting and c.is_non_repelling and not c.is_parabolic and not c.contains_inf
    assert np.isclose(c.period, 1)
