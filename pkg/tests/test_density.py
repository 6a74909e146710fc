import math

import numpy as np
import pytest

from conftest import random_exppoly
from hcyclic.core import Covector, ExpPoly, Point, parse_expr
from hcyclic.density import (ExpCombo, RegionSearchError, approx_in_region, approx_power,
                             approx_power_contour, find_region_point)
from hcyclic.operators import DirectionRule, MultiOp, Region, SingleOp, VaryingOp
from hcyclic.seminorm import BallSpec, SamplerConfig, make_rng, sup_lower
from hcyclic.symbols import Symbol, ToleranceError

EXP = Symbol.exp()
BIRKHOFF = SingleOp(EXP, Point((1.0,)))
BIRKHOFF2 = SingleOp(EXP, Point((1.0, 0.0)))
BALL = BallSpec(1.0)
DENSE = SamplerConfig(4096, 1)


def sampled_error(combo, f, ball=BALL, cfg=DENSE):
    return sup_lower(combo.to_exppoly() - f, ball, cfg)


def circle_error(weights, exponents, target, count=20_000):
    """Dense unit-circle oracle for one-variable combos, independent of ExpPoly."""
    z = np.exp(2j * np.pi * np.arange(count) / count)
    vals = sum(w * np.exp(e * z) for w, e in zip(weights, exponents))
    return float(np.abs(vals - target(z)).max())


class TestFindRegionPoint:
    def test_birkhoff_u(self):
        rb = find_region_point(BIRKHOFF, Region.U)
        assert rb.modulus_hi <= 0.8 and rb.radius > 0.1
        # the documented point lambda = -1 certifies a ball of radius 0.1
        lo, hi = BIRKHOFF.modulus_bounds(Covector((-1.0,)), 0.1)
        assert hi <= 0.8

    def test_birkhoff_v(self):
        rb = find_region_point(BIRKHOFF, Region.V)
        assert rb.center.coords == (1 + 0j,) and rb.modulus_lo >= 1.2

    def test_shifted_polynomial(self):
        op = SingleOp(Symbol.poly([5, 1]), Point((1.0,)))
        rb = find_region_point(op, Region.U)
        assert abs(rb.center.coords[0] + 5) < 1

    def test_ball_classifies(self):
        rng = make_rng(8)
        for op in (BIRKHOFF2, MultiOp(((EXP, Point((1.0, 0.0))), (EXP, Point((0.0, 1.0))))),
                   SingleOp(Symbol.poly([1, 0, 1]), Point((1.0, 0.0)))):
            for region in (Region.U, Region.V):
                rb = find_region_point(op, region)
                c = np.asarray(rb.center.coords)
                for _ in range(40):
                    d = rng.normal(size=2) + 1j * rng.normal(size=2)
                    psi = Covector(tuple(c + d / np.linalg.norm(d) * rb.radius * rng.uniform(0, 0.999)))
                    assert op.classify(psi, 0.2, 1e-13).region is region

    def test_min_modulus(self):
        rb = find_region_point(BIRKHOFF, Region.V, min_modulus=5.0)
        assert rb.modulus_lo >= 5.0

    def test_boundary_rejected(self):
        with pytest.raises(ValueError):
            find_region_point(BIRKHOFF, Region.BOUNDARY)

    def test_failure(self):
        # |1 + z^2/1e9| stays near 1 on any grid reachable with budget 0
        op = SingleOp(Symbol.poly([1, 0, 1e-9]), Point((1.0,)))
        with pytest.raises(RegionSearchError):
            find_region_point(op, Region.V, budget=0)


class TestApproxPower:
    @pytest.mark.parametrize("t", [0.5, 0.1, 0.01])
    def test_linear_bound(self, t):
        combo = approx_power(Covector((1.0,)), 1, BALL, t=t)
        assert combo.truncation_error == pytest.approx(t * math.e, rel=1e-12)
        err = circle_error(combo.weights, combo.exponents[:, 0], lambda z: z)
        assert err <= t * math.e

    def test_small_t_value(self):
        combo = approx_power(Covector((1.0,)), 1, BALL, t=0.01)
        # oracle: (e^{0.01 z} - 1)/0.01 - z on |z| = 1, largest at z = 1
        oracle = (math.exp(0.01) - 1) / 0.01 - 1
        assert circle_error(combo.weights, combo.exponents[:, 0], lambda z: z) == pytest.approx(oracle, rel=1e-6)
        assert oracle == pytest.approx(0.00502, abs=1e-5)

    def test_monotone_in_t(self):
        errs = []
        for t in (0.5, 0.1, 0.01):
            c = approx_power(Covector((1.0,)), 1, BALL, t=t)
            errs.append(circle_error(c.weights, c.exponents[:, 0], lambda z: z))
        assert errs[0] > errs[1] > errs[2]

    def test_quadratic(self):
        combo = approx_power(Covector((1.0,)), 2, BALL, t=0.1)
        assert 0.0 in combo.exponents[:, 0].real and 0.1 in combo.exponents[:, 0].real
        err = circle_error(combo.weights, combo.exponents[:, 0], lambda z: z**2 / 2)
        assert err <= combo.certified_error and combo.certified_error >= 0.1 * math.e

    def test_eps_mode(self):
        combo = approx_power(Covector((0.5,)), 1, BALL, eps=1e-3)
        assert combo.certified_error <= 1e-3
        assert circle_error(combo.weights, combo.exponents[:, 0], lambda z: z / 2) <= 1e-3

    def test_infeasible_eps(self):
        with pytest.raises(ToleranceError):
            approx_power(Covector((1.0,)), 3, BALL, eps=1e-6)


class TestContour:
    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_power(self, k):
        psi = Covector((1.0,))
        combo = approx_power_contour(psi, [0.0] * k + [1.0], 0.3, 1e-6, BALL)
        err = circle_error(combo.weights, combo.exponents[:, 0], lambda z: z**k / math.factorial(k))
        assert err <= combo.certified_error <= 1e-6


class TestApproxInRegion:
    def test_zero(self):
        combo = approx_in_region(ExpPoly.zero(1), BIRKHOFF, Region.V, 0.1, BALL)
        assert len(combo) == 0 and combo.certified_error == 0

    def test_bypass(self):
        f = ExpPoly.exponential((1.05,), 2.0)
        combo = approx_in_region(f, BIRKHOFF, Region.V, 0.1, BALL)
        assert len(combo) == 1 and combo.certified_error == 0 and combo.to_exppoly() == f

    def test_z_into_v(self):
        f = parse_expr("z", 1)
        combo = approx_in_region(f, BIRKHOFF, Region.V, 0.1, BALL)
        assert sampled_error(combo, f) < 0.1
        assert circle_error(combo.weights, combo.exponents[:, 0], lambda z: z) <= combo.certified_error

    @pytest.mark.parametrize("text,dim", [("x1*x2", 2), ("x1^2 + exp(-x2)", 2), ("1 + x2", 2), ("z^3 - 2*z", 1)])
    def test_exponents_in_region(self, text, dim):
        op = BIRKHOFF if dim == 1 else BIRKHOFF2
        f = parse_expr(text, dim)
        for region in (Region.U, Region.V):
            combo = approx_in_region(f, op, region, 0.05, BALL)
            for row in combo.exponents:
                assert op.classify(Covector(tuple(row)), 0.2, 1e-13).region is region
            assert sampled_error(combo, f) <= combo.certified_error <= 0.05

    def test_monotone_eps(self):
        f = parse_expr("z^2 + exp(-z)", 1)
        errs = [sampled_error(approx_in_region(f, BIRKHOFF, Region.V, eps, BALL), f) for eps in (0.5, 0.1, 0.02)]
        assert errs[0] >= errs[1] >= errs[2]

    def test_integer_polarization(self):
        f = parse_expr("x1*x2", 2)
        combo = approx_in_region(f, BIRKHOFF2, Region.V, 0.1, BALL, polarization="integer")
        assert sampled_error(combo, f) <= combo.certified_error <= 0.1

    def test_soundness_corpus(self):
        """Sampling never refutes a certificate (>= 100 runs)."""
        rng = make_rng(77)
        ops = {1: BIRKHOFF, 2: BIRKHOFF2}
        runs = 0
        for i in range(50):
            dim = 1 + i % 2
            f = random_exppoly(rng, dim, max_terms=2, max_deg=3, max_phi=1.0)
            for region in (Region.U, Region.V):
                combo = approx_in_region(f, ops[dim], region, 0.2, BALL)
                assert sampled_error(combo, f, cfg=SamplerConfig(1024, i)) <= combo.certified_error
                runs += 1
        assert runs >= 100

    def test_other_operators(self):
        f = parse_expr("1 + z", 1)
        for op in (SingleOp(Symbol.poly([0, 1]), Point((1.0,))),
                   VaryingOp(EXP, DirectionRule(Point((1.0,)), "harmonic"))):
            combo = approx_in_region(f, op, Region.V, 0.2, BALL)
            assert sampled_error(combo, f) <= combo.certified_error <= 0.2

    def test_infeasible(self):
        with pytest.raises(ToleranceError):
            approx_in_region(parse_expr("z^2", 1), BIRKHOFF, Region.V, 1e-15, BALL)

    def test_nonstrict_reports_overrun(self):
        combo = approx_in_region(parse_expr("z^2", 1), BIRKHOFF, Region.V, 1e-15, BALL, strict=False)
        assert isinstance(combo, ExpCombo) and combo.certified_error > 1e-15
