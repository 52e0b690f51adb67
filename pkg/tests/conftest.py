import functools

import pytest

from mme_lab.atlas import build_atlas
from mme_lab.config import load_fixture, replace
from mme_lab.cycles import find_cycles
from mme_lab.maps import RationalMap, conjugate
from mme_lab.sampler import sample_backward

_RESULTS = []


class Lab:
    """A fixture map with its chart, cycles, atlas and samples (all in the chart)."""

    def __init__(self, name, resolution=None, n=None, rng_seed=None):
        cfg = replace(load_fixture(name), resolution=resolution, n_samples=n, rng_seed=rng_seed)
        self.cfg = cfg
        self.R = cfg.rational_map()
        self.M = cfg.mobius()
        self.S = conjugate(self.R, self.M)
        self.cycles = find_cycles(self.S, cfg.k_max)
        self._atlas = None
        self._samples = None

    @property
    def atlas(self):
        if self._atlas is None:
            c = self.cfg
            self._atlas = build_atlas(self.S, c.window(), self.cycles, max_iter=c.max_iter, tol_par=c.tol_par)
        return self._atlas

    @property
    def samples(self):
        if self._samples is None:
            c = self.cfg
            seed = None if c.seed_point is None else self.M(complex(*c.seed_point))
            self._samples = sample_backward(self.S, seed, c.burn_in, c.n_samples, c.rng_seed)
        return self._samples


@functools.lru_cache(maxsize=None)
def lab(name, resolution=None, n=None, rng_seed=None):
    return Lab(name, resolution, n, rng_seed)


def poly(*coeffs):
    return RationalMap.from_coeffs(list(coeffs))


@pytest.fixture
def record():
    """record(number, ok, detail) adds one line to the acceptance summary."""

    def rec(num, ok, detail=""):
        _RESULTS.append((num, bool(ok), detail))
        return ok

    return rec


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(_RESULTS, key=lambda r: (int(str(r[0]).rstrip("abc")), str(r[0]))):
        terminalreporter.write_line(f"criterion {num:>3}: {'PASS' if ok else 'FAIL'}  {detail}")
