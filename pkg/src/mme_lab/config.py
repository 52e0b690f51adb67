"""Experiment configuration files (TOML) and the bundled fixtures.

Coefficient lists are ascending (entry k multiplies z**k) and each entry is a
pair [re, im].  The optional [chart] table gives a Mobius map
w = (a z + b) / (c z + d); analysis then runs on the conjugated map in the
w-plane, which keeps unbounded Julia sets inside a finite window.
"""

import dataclasses
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomli
import tomli_w

from .errors import ConfigError
from .maps import Mobius, RationalMap

FIXTURES = ("parabolic2", "example2", "basilica", "cubic")


@dataclass
class ExperimentConfig:
    name: str
    numerator: list
    denominator: list = field(default_factory=lambda: [[1.0, 0.0]])
    description: str = ""
    chart: list = None  # [[re, im]] * 4 for a, b, c, d
    center: list = field(default_factory=lambda: [0.0, 0.0])
    half_width: float = 2.0
    resolution: int = 1024
    max_iter: int = 2000
    tol_par: float = 1e-3
    k_max: int = 4
    burn_in: int = 100
    n_samples: int = 100_000
    rng_seed: int = 1
    seed_point: list = None
    epsilons: list = field(default_factory=lambda: [0.05, 0.02, 0.01])
    grand_orbit_epsilon: float = 0.02
    invariance_probes: int = 200
    angles: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    out: str = "out"
    expect: dict = field(default_factory=dict)

    # ------------------------------------------------------------ derived objects

    def rational_map(self):
        return RationalMap.from_coeffs(_complexes(self.numerator), _complexes(self.denominator))

    def mobius(self):
        if not self.chart:
            return Mobius()
        return Mobius(*_complexes(self.chart))

    def window(self, resolution=None):
        from .atlas import GridWindow

        return GridWindow(complex(*self.center), self.half_width, resolution or self.resolution)

    # ------------------------------------------------------------ serialization

    def to_dict(self):
        out = {"name": self.name}
        if self.description:
            out["description"] = self.description
        out["map"] = {"numerator": self.numerator, "denominator": self.denominator}
        if self.chart:
            out["chart"] = dict(zip("abcd", self.chart))
        out["window"] = {"center": self.center, "half_width": self.half_width}
        out["atlas"] = {"resolution": self.resolution, "max_iter": self.max_iter, "tol_par": self.tol_par}
        out["cycles"] = {"k_max": self.k_max}
        sampler = {"burn_in": self.burn_in, "n_samples": self.n_samples, "rng_seed": self.rng_seed}
        if self.seed_point is not None:
            sampler["seed_point"] = self.seed_point
        out["sampler"] = sampler
        out["measure"] = {
            "epsilons": self.epsilons,
            "grand_orbit_epsilon": self.grand_orbit_epsilon,
            "invariance_probes": self.invariance_probes,
        }
        if self.angles or self.pairs:
            out["rays"] = {"angles": self.angles, "pairs": self.pairs}
        out["output"] = {"dir": self.out}
        if self.expect:
            out["expect"] = self.expect
        return out

    def dumps(self):
        return tomli_w.dumps(self.to_dict())

    def save(self, path):
        Path(path).write_text(self.dumps())


# table.key -> field name
_LAYOUT = {
    ("name",): "name",
    ("description",): "description",
    ("map", "numerator"): "numerator",
    ("map", "denominator"): "denominator",
    ("window", "center"): "center",
    ("window", "half_width"): "half_width",
    ("atlas", "resolution"): "resolution",
    ("atlas", "max_iter"): "max_iter",
    ("atlas", "tol_par"): "tol_par",
    ("cycles", "k_max"): "k_max",
    ("sampler", "burn_in"): "burn_in",
    ("sampler", "n_samples"): "n_samples",
    ("sampler", "rng_seed"): "rng_seed",
    ("sampler", "seed_point"): "seed_point",
    ("measure", "epsilons"): "epsilons",
    ("measure", "grand_orbit_epsilon"): "grand_orbit_epsilon",
    ("measure", "invariance_probes"): "invariance_probes",
    ("rays", "angles"): "angles",
    ("rays", "pairs"): "pairs",
    ("output", "dir"): "out",
}


def _complexes(pairs):
    return [complex(float(p[0]), float(p[1])) for p in pairs]


def _line_of(text, key):
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=", re.M)
    m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _is_pair(p):
    return (
        isinstance(p, list)
        and len(p) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)
    )


def _validate(cfg, text):
    def fail(msg, key):
        raise ConfigError(msg, _line_of(text, key))

    for key in ("numerator", "denominator"):
        val = getattr(cfg, key)
        if not isinstance(val, list) or not val or not all(_is_pair(p) for p in val):
            fail(f"{key} must be a non-empty list of [re, im] pairs", key)
    if cfg.chart is not None:
        if len(cfg.chart) != 4 or not all(_is_pair(p) for p in cfg.chart):
            fail("chart needs a, b, c, d as [re, im] pairs", "a")
    if not _is_pair(cfg.center):
        fail("window center must be [re, im]", "center")
    if cfg.seed_point is not None and not _is_pair(cfg.seed_point):
        fail("seed_point must be [re, im]", "seed_point")
    for key in ("resolution", "max_iter", "k_max", "burn_in", "n_samples", "rng_seed", "invariance_probes"):
        v = getattr(cfg, key)
        if not isinstance(v, int) or isinstance(v, bool):
            fail(f"{key} must be an integer", key)
    for key in ("half_width", "tol_par", "grand_orbit_epsilon"):
        v = getattr(cfg, key)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            fail(f"{key} must be a positive number", key)
        setattr(cfg, key, float(v))
    if not isinstance(cfg.epsilons, list) or not cfg.epsilons:
        fail("epsilons must be a non-empty list", "epsilons")
    cfg.epsilons = [float(e) for e in cfg.epsilons]
    cfg.angles = [str(a) for a in cfg.angles]
    cfg.pairs = [[str(a), str(b)] for a, b in cfg.pairs]
    try:
        cfg.rational_map()
    except Exception as exc:  # degree, coprimality
        fail(f"invalid map: {exc}", "numerator")
    try:
        cfg.mobius()
    except ValueError as exc:
        fail(str(exc), "a")


def loads(text):
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        msg = str(exc)
        m = re.search(r"line (\d+)", msg)
        if m is None:
            raise ConfigError(msg) from None
        raise ConfigError(re.sub(r"\s*\(at line \d+, column \d+\)", "", msg), int(m.group(1))) from None
    kwargs = {}
    for path, name in _LAYOUT.items():
        node = data
        for part in path:
            if not isinstance(node, dict) or part not in node:
                break
            node = node[part]
        else:
            kwargs[name] = node
    if "chart" in data:
        ch = data["chart"]
        kwargs["chart"] = [ch.get(k) for k in "abcd"]
    if "expect" in data:
        kwargs["expect"] = data["expect"]
    if "name" not in kwargs:
        raise ConfigError("missing top-level name", 1)
    if "numerator" not in kwargs:
        raise ConfigError("missing [map] numerator", _line_of(text, "[map]"))
    cfg = ExperimentConfig(**kwargs)
    _validate(cfg, text)
    return cfg


def load(path):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    return loads(p.read_text())


def fixture_names():
    root = resources.files("mme_lab") / "fixtures"
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".toml"))


def load_fixture(name):
    root = resources.files("mme_lab") / "fixtures"
    f = root / f"{name}.toml"
    if not f.is_file():
        raise ConfigError(f"unknown fixture {name!r}; known: {', '.join(fixture_names())}")
    return loads(f.read_text())


def resolve(spec):
    """A config from a path, or from a fixture name when no such file exists."""
    p = Path(spec)
    if p.suffix == ".toml" or p.exists():
        if p.exists():
            return load(p)
        stem = p.stem
        if stem in fixture_names():
            return load_fixture(stem)
        raise ConfigError(f"config file not found: {spec}")
    return load_fixture(spec)


def replace(cfg, **changes):
    return dataclasses.replace(cfg, **{k: v for k, v in changes.items() if v is not None})
