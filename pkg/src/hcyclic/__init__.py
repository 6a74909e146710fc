"""Hypercyclic convolution operators on spaces of entire functions, made computable.

The working class is exponential polynomials ``sum p_i(x) exp(phi_i(x))``.
Operators ``Phi_a(D)`` act on them exactly, exponentials are eigenvectors,
and the density and witness constructions produce certified error bounds
next to sampled ones.
"""

from .core import Covector, ExpPoly, NormTag, Point, Polynomial, dumps, loads, parse_expr
from .density import ExpCombo, RegionBall, RegionSearchError, approx_in_region, approx_power, find_region_point
from .dynamics import Tour, Witness, criterion_report, orbit_tour, transitivity_witness
from .operators import DirectionRule, MultiOp, Region, RegionError, SingleOp, VaryingOp
from .seminorm import BallSpec, SamplerConfig, sup_lower, sup_upper
from .symbols import Symbol, ToleranceError

__version__ = "0.1.0"
