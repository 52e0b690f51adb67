"""Numerical lab for the measure of maximal entropy of rational maps.

Periodic cycles and multipliers, a Fatou component atlas on a grid window,
backward-iteration sampling of the measure, boundary-measure estimates,
external rays of polynomials, and a command line driver (``mme-lab``).
"""

from .atlas import build_atlas, classify_orbit, complete_invariance_check, connectivity_of_J_polynomial
from .config import ExperimentConfig, load, load_fixture, loads
from .cycles import Cycle, CycleClass, find_cycles, multiplier
from .errors import *  # noqa: F401,F403
from .maps import INF, Mobius, RationalMap, chordal, conjugate, critical_points, eval_map, preimages
from .measure import (
    boundary_measure,
    classify_map,
    dichotomy_report,
    grand_orbit_equality,
    residual_mass,
)
from .pipeline import analyze
from .rays import colanding_pair, landing, trace_ray
from .sampler import invariance_check, sample_backward

__version__ = "0.1.0"
