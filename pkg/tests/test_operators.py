import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import exppolys, random_covector
from hcyclic.core import Covector, ExpPoly, Point, Polynomial, parse_expr
from hcyclic.operators import (DirectionRule, MultiOp, Region, RegionError, SingleOp, VaryingOp, apply,
                               apply_inverse, classify, eigenvalue, growth_bound, iterate, translate)
from hcyclic.seminorm import BallSpec, SamplerConfig, make_rng, sup_lower, sup_upper
from hcyclic.symbols import Symbol

EXP = Symbol.exp()
E1 = Point((1.0,))
BIRKHOFF = SingleOp(EXP, E1)
MACLANE = SingleOp(Symbol.poly([0, 1]), E1)
Z = Polynomial.variable(0, 1)


def series_apply(sym, a, f, terms=60):
    """Defining series sum_n c_n D_a^n f, used as an independent oracle."""
    out = ExpPoly.zero(f.dim)
    d = f
    for n in range(terms):
        c = sym.coeff(n)
        if c != 0:
            out = out + d.scale(c)
        d = d.directional_derivative(a)
    return out


class TestEigenvalue:
    def test_birkhoff(self):
        g, err = eigenvalue(BIRKHOFF, Covector((-1.0,)))
        assert g == pytest.approx(math.exp(-1), rel=1e-15) and err == 0

    def test_maclane(self):
        assert eigenvalue(MACLANE, Covector((2.0,)))[0] == 2

    def test_multi_against_series(self):
        op = MultiOp(((EXP, Point((1.0, 0.0))), (EXP, Point((0.0, 1.0)))))
        g, _ = eigenvalue(op, Covector((1.0, -1.0)))
        oracle = sum(1 / math.factorial(n) for n in range(200)) + sum((-1) ** n / math.factorial(n)
                                                                   for n in range(200))
        assert abs(g - oracle) <= 1e-12 and g == pytest.approx(3.086161, abs=1e-6)

    def test_multi_is_sum_of_singles(self):
        parts = ((Symbol.poly([1, 2, 0.5]), Point((1.0, 0.5))), (Symbol.scaled_exp(0.3j), Point((0.0, 2.0))))
        op = MultiOp(parts)
        for phi in [(0.2, -0.7j), (1.5, 0.25), (-1j, 1 + 1j)]:
            phi = Covector(phi)
            singles = sum(SingleOp(s, b).eigenvalue(phi)[0] for s, b in parts)
            assert op.eigenvalue(phi)[0] == singles

    def test_varying_constant_rule_matches_single(self):
        a = Point((0.6, -0.8j))
        single = SingleOp(EXP, a)
        vary = VaryingOp(EXP, DirectionRule(a, "const"))
        for phi in [(0.3, 0.1), (-1.0, 2j), (0.0, 0.0)]:
            g1, _ = single.eigenvalue(Covector(phi))
            g2, err = vary.eigenvalue(Covector(phi), 1e-12)
            assert abs(g1 - g2) <= err + 1e-14

    def test_varying_against_brute_force(self):
        op = VaryingOp(EXP, DirectionRule(E1, "harmonic"))
        g, err = op.eigenvalue(Covector((0.7 - 0.2j,)), 1e-11)
        lam = 0.7 - 0.2j
        brute = sum(cmath.exp(n * cmath.log(lam * (1 + 1 / (n + 1))) - math.lgamma(n + 1))
                    for n in range(1, 400)) + 1
        assert err <= 1e-11 and abs(g - brute) <= err + 1e-14

    def test_vectorized_matches_scalar(self):
        rng = make_rng(3)
        phis = np.array([random_covector(rng, 2).coords for _ in range(12)])
        for op in (SingleOp(Symbol.poly([1, 0, 1]), Point((1.0, 1.0))),
                   MultiOp(((EXP, Point((1.0, 0.0))), (EXP, Point((0.0, 1.0))))),
                   VaryingOp(EXP, DirectionRule(Point((1.0, 0.0)), "alternating"))):
            g, err = op.eigenvalues(phis, 1e-13)
            for row, gv, ev in zip(phis, g, err):
                g1, e1 = op.eigenvalue(Covector(tuple(row)), 1e-13)
                assert abs(gv - g1) <= max(ev, e1) + 1e-13 * (1 + abs(g1))


class TestClassify:
    def test_u(self):
        assert classify(BIRKHOFF, Covector((-1.0,)), 0.2).region is Region.U

    def test_v(self):
        assert classify(BIRKHOFF, Covector((1.0,)), 0.2).region is Region.V

    def test_boundary(self):
        c = classify(BIRKHOFF, Covector((1j * math.pi,)), 0.1)
        assert c.region is Region.BOUNDARY and abs(c.g + 1) < 1e-15

    def test_tolerance_guard(self):
        with pytest.raises(ValueError):
            classify(BIRKHOFF, Covector((1.0,)), 0.1, tol=0.06)


class TestApply:
    def test_maclane_cube(self):
        assert apply(MACLANE, ExpPoly.from_polynomial(Z * Z * Z)) == ExpPoly.from_polynomial((Z * Z).scale(3))

    def test_translation_square(self):
        got = apply(BIRKHOFF, ExpPoly.from_polynomial(Z * Z))
        assert got == ExpPoly.from_polynomial(Polynomial(1, {(0,): 1, (1,): 2, (2,): 1}))

    def test_translation_z_exp_2z(self):
        got = apply(BIRKHOFF, ExpPoly(1, [(Z, (2.0,))]))
        want = ExpPoly(1, [(Polynomial(1, {(0,): math.exp(2), (1,): math.exp(2)}), (2.0,))])
        assert (got - want).is_zero() or (got - want).max_abs_coefficient() < 1e-13

    @pytest.mark.parametrize("sym", [EXP, Symbol.poly([1, 0, 1]), Symbol.scaled_exp(0.5 - 0.5j),
                                     Symbol.poly([0, 2, 0, -1])])
    def test_closed_form_matches_series(self, sym, corpus):
        for f, a in corpus[:12]:
            op = SingleOp(sym, a)
            diff = apply(op, f) - series_apply(sym, a, f)
            assert diff.is_zero() or sup_upper(diff, BallSpec()) <= 1e-9 * max(1.0, sup_upper(f, BallSpec(3.0)))

    def test_eigen_relation(self):
        rng = make_rng(5)
        for _ in range(20):
            phi = random_covector(rng, 2)
            for op in (SingleOp(EXP, Point((1.0, -0.5))), SingleOp(Symbol.poly([0, 1, 1]), Point((0.0, 1.0)))):
                out = apply(op, ExpPoly.exponential(phi))
                assert len(out) == 1 and out.is_pure_exponential()
                assert abs(out.poly_at(phi).constant_term() - op.eigenvalue(phi)[0]) <= 1e-12

    def test_multi_is_sum(self, corpus):
        for f, _ in corpus[:10]:
            if f.dim != 2:
                continue
            b1, b2 = Point((1.0, 0.0)), Point((0.3, 1.0))
            op = MultiOp(((EXP, b1), (Symbol.poly([0, 1]), b2)))
            diff = apply(op, f) - (apply(SingleOp(EXP, b1), f) + apply(SingleOp(Symbol.poly([0, 1]), b2), f))
            assert diff.is_zero() or diff.max_abs_coefficient() <= 1e-12 * (1 + f.max_abs_coefficient())

    def test_varying_against_series(self):
        rule = DirectionRule(Point((1.0, 0.5)), "harmonic")
        op = VaryingOp(EXP, rule)
        f = parse_expr("x1^2*exp(0.3*x2) + x2 - exp(-x1)", 2)
        oracle = ExpPoly.zero(2)
        # sum_n c_n d^n f(.)(b_n): apply D_{b_n} n times to f
        for n in range(60):
            d = f
            for _ in range(n):
                d = d.directional_derivative(rule(n))
            oracle = oracle + d.scale(EXP.coeff(n))
        got, err = op.apply_with_error(f, 1e-10)
        assert sup_upper(got - oracle, BallSpec()) <= err + 1e-12


class TestTranslate:
    def test_square(self):
        assert translate(ExpPoly.from_polynomial(Z * Z), (1.0,)) == parse_expr("z^2 + 2*z + 1", 1)

    def test_exponential(self):
        lam, b = 0.5 + 1j, 2.0 - 1j
        got = translate(ExpPoly.exponential((lam,)), (b,))
        assert got.poly_at((lam,)).constant_term() == pytest.approx(cmath.exp(lam * b))

    def test_two_dims(self):
        f = ExpPoly(2, [(Polynomial.variable(0, 2), (0.0, 1.0))])
        got = translate(f, (0.0, 1.0))
        assert got.poly_at((0.0, 1.0)) == Polynomial.variable(0, 2).scale(math.e)


class TestIterate:
    def test_exponential_power(self):
        lam = 0.3 - 0.4j
        got = iterate(BIRKHOFF, ExpPoly.exponential((lam,)), 5)
        assert got.poly_at((lam,)).constant_term() == pytest.approx(cmath.exp(5 * lam), rel=1e-14)

    def test_zero_steps(self, corpus):
        f = corpus[3][0]
        assert iterate(SingleOp(EXP, corpus[3][1]), f, 0) == f

    def test_maclane_twice(self):
        assert iterate(MACLANE, ExpPoly.from_polynomial(Z * Z * Z), 2) == ExpPoly.from_polynomial(Z.scale(6))

    def test_birkhoff_matches_translation(self, corpus):
        for f, a in corpus[:15]:
            got = iterate(SingleOp(EXP, a), f, 4)
            want = translate(f, tuple(4 * c for c in a.coords))
            diff = got - want
            assert diff.is_zero() or diff.max_abs_coefficient() <= 1e-10 * (1 + want.max_abs_coefficient())

    @pytest.mark.parametrize("m,n", [(1, 1), (2, 3), (5, 4)])
    def test_semigroup(self, corpus, m, n):
        for f, a in corpus[:10]:
            op = SingleOp(Symbol.poly([1, 0.5, 0.25]), a)
            lhs = iterate(op, f, m + n)
            rhs = iterate(op, iterate(op, f, m), n)
            diff = lhs - rhs
            assert diff.is_zero() or diff.max_abs_coefficient() <= 1e-10 * (1 + lhs.max_abs_coefficient())

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            iterate(BIRKHOFF, ExpPoly.exponential((1.0,)), -1)

    @given(st.floats(0.05, 0.5), st.integers(1, 30))
    def test_u_decay(self, mu, n):
        # |g(phi)| <= 1 - mu for phi = log(1 - mu) under Birkhoff
        phi = (math.log(1 - mu),)
        assert classify(BIRKHOFF, Covector(phi), mu / 2).region is Region.U
        c = iterate(BIRKHOFF, ExpPoly.exponential(phi), n).poly_at(phi).constant_term()
        assert abs(c) <= (1 - mu) ** n * (1 + 1e-12)

    @given(st.floats(0.05, 0.5), st.integers(1, 30))
    def test_v_decay_of_inverse(self, mu, n):
        phi = (math.log(1 + mu) + 0.3j,)
        c = BIRKHOFF.iterate_inverse(ExpPoly.exponential(phi), n, mu / 2).poly_at(phi).constant_term()
        assert abs(c) <= (1 + mu) ** -n * (1 + 1e-12)


class TestInverse:
    def test_single(self):
        got = apply_inverse(BIRKHOFF, ExpPoly.exponential((1.0,)), 0.2)
        assert got.poly_at((1.0,)).constant_term() == pytest.approx(1 / math.e)

    def test_two_terms(self):
        f = ExpPoly.from_exponentials([(2, (1.0,)), (3, (2.0,))], 1)
        got = apply_inverse(BIRKHOFF, f, 0.2)
        assert got.poly_at((1.0,)).constant_term() == pytest.approx(2 / math.e)
        assert got.poly_at((2.0,)).constant_term() == pytest.approx(3 / math.e**2)

    def test_not_in_v(self):
        with pytest.raises(RegionError, match="not in V"):
            apply_inverse(BIRKHOFF, ExpPoly.exponential((-1.0,)), 0.2)

    def test_polynomial_part_rejected(self):
        with pytest.raises(RegionError):
            apply_inverse(BIRKHOFF, ExpPoly(1, [(Z, (1.0,))]), 0.2)

    @given(st.lists(st.tuples(st.floats(0.3, 2.0), st.floats(-3, 3), st.floats(-2, 2)), min_size=1, max_size=6))
    def test_right_inverse(self, rows):
        f = ExpPoly.from_exponentials([(complex(c, 1), (complex(re, im),)) for re, im, c in rows], 1)
        back = apply(BIRKHOFF, apply_inverse(BIRKHOFF, f, 0.2)) - f
        assert back.is_zero() or back.max_abs_coefficient() <= 1e-10


class TestGrowthBound:
    def test_plug_in(self):
        assert growth_bound(BIRKHOFF, 1, BallSpec(1.0)) == (2.0, 3.0)

    def test_zero_steps(self):
        assert growth_bound(BIRKHOFF, 0, BallSpec(1.0)) == (1.0, 1.0)

    def test_sampled_below_bound(self):
        f = ExpPoly.from_polynomial(Z * Z)
        C, r = growth_bound(BIRKHOFF, 1, BallSpec(1.0))
        lhs = sup_lower(apply(BIRKHOFF, f), BallSpec(1.0), SamplerConfig(1024))
        assert lhs <= C * sup_upper(f, BallSpec(r))


class TestOperatorSpecs:
    def test_zero_direction(self):
        with pytest.raises(ValueError):
            SingleOp(EXP, Point((0.0, 0.0)))

    def test_dependent_directions(self):
        with pytest.raises(ValueError, match="independent"):
            MultiOp(((EXP, Point((1.0, 1.0))), (EXP, Point((2.0, 2.0)))))

    def test_varying_bound(self):
        with pytest.raises(ValueError):
            VaryingOp(EXP, DirectionRule(E1, "harmonic"), bound=1.5)
        assert VaryingOp(EXP, DirectionRule(E1, "harmonic")).bound == 2.0

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            DirectionRule(E1, "random")
