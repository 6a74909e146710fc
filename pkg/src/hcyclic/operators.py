"""Operators ``Phi_a(D)`` and their generalizations acting on ExpPolys.

On a term ``p e^phi`` every operator here acts as a polynomial in commuting
directional derivatives, e.g. for a single direction

    Phi_a(D)(p e^phi) = e^phi * sum_{k <= deg p} Phi^{(k)}(phi(a)) / k! * D_a^k p,

which is finite because ``D_a^k p = 0`` past the degree of ``p``.  Pure
exponentials are eigenvectors: ``T e^phi = g(phi) e^phi``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Covector, ExpPoly, Point, Polynomial, _as_coords, translate as _translate, vector_norm
from .seminorm import BallSpec
from .symbols import SERIES_TERM_CAP, Symbol, SymbolKind, ToleranceError, exp_tail


UNIT_ROUNDOFF = 2.0**-53


class Region(Enum):
    U = "U"
    V = "V"
    BOUNDARY = "BOUNDARY"


class RegionError(ValueError):
    """An exponent lies outside the region an operation requires."""


@dataclass(frozen=True)
class Classification:
    region: Region
    g: complex
    margin: float
    err: float = 0.0


# ---------------------------------------------------------------------------
# direction rules for the varying-direction operator
# ---------------------------------------------------------------------------

_RULES: dict[str, Callable[[int], float]] = {
    "const": lambda n: 1.0,
    "alternating": lambda n: -1.0 if n % 2 else 1.0,
    "harmonic": lambda n: 1.0 + 1.0 / (n + 1),
}
_RULE_SUP = {"const": 1.0, "alternating": 1.0, "harmonic": 2.0}


@dataclass(frozen=True)
class DirectionRule:
    """``b_n = s(n) * a`` for a documented scalar rule ``s``."""

    base: Point
    name: str = "const"

    def __post_init__(self):
        if self.name not in _RULES:
            raise ValueError(f"unknown direction rule {self.name!r}; known: {sorted(_RULES)}")

    def scale(self, n: int) -> float:
        return _RULES[self.name](n)

    def __call__(self, n: int) -> Point:
        return self.base.scale(self.scale(n))

    def sup_norm(self) -> float:
        return _RULE_SUP[self.name] * self.base.norm()


# ---------------------------------------------------------------------------
# operator specs
# ---------------------------------------------------------------------------


class Operator:
    """Common machinery; subclasses supply the per-exponent derivative symbol."""

    dim: int

    def eigenvalue(self, phi: Covector, tol: float = 1e-14) -> tuple[complex, float]:
        raise NotImplementedError

    def directions(self) -> list[Point]:
        raise NotImplementedError

    def local_symbol(self, phi_coords: tuple, degree: int, tol: float,
                     weights: Sequence[float]) -> tuple[dict, float]:
        """Coefficients ``beta_m`` with ``T(p e^phi) = e^phi sum_m beta_m D^m p``.

        ``m`` is a multi-index over :meth:`directions`, truncated at total
        degree ``degree``.  ``weights[k]`` bounds the ball norm of order-k
        derivative terms; the returned error is ``sum_k err_k * weights[k]``
        and is kept below ``tol``.
        """
        raise NotImplementedError

    def modulus_bounds(self, phi0: Covector, delta: float) -> tuple[float, float]:
        """Certified bounds of ``|g|`` over the dual-norm ball of radius delta."""
        raise NotImplementedError

    def symbols(self) -> list[Symbol]:
        raise NotImplementedError

    # shared operations ----------------------------------------------------
    def eigenvalues(self, phis: np.ndarray, tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized eigenvalues for rows of ``phis``; returns ``(g, err)``."""
        g = np.empty(len(phis), dtype=complex)
        err = np.zeros(len(phis))
        for i, row in enumerate(phis):
            g[i], err[i] = self.eigenvalue(Covector(tuple(row)), tol)
        return g, err

    def classify(self, phi: Covector, margin: float, tol: float = 1e-12) -> Classification:
        if margin <= 0:
            raise ValueError("margin must be positive")
        if tol >= margin / 2:
            raise ValueError("tol must be below margin/2")
        g, err = self.eigenvalue(phi, tol)
        mod = abs(g)
        if mod + err <= 1 - margin:
            region = Region.U
        elif mod - err >= 1 + margin:
            region = Region.V
        else:
            region = Region.BOUNDARY
        return Classification(region, g, margin, err)

    def apply_with_error(self, f: ExpPoly, tol: float = 1e-12,
                         ball: BallSpec = BallSpec()) -> tuple[ExpPoly, float]:
        return self._power_with_error(f, 1, tol, ball)

    def apply(self, f: ExpPoly, tol: float = 1e-12, ball: BallSpec = BallSpec()) -> ExpPoly:
        return self.apply_with_error(f, tol, ball)[0]

    def iterate(self, f: ExpPoly, n: int, tol: float = 1e-12, ball: BallSpec = BallSpec()) -> ExpPoly:
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0:
            return f
        return self._power_with_error(f, n, tol, ball)[0]

    def _power_with_error(self, f: ExpPoly, n: int, tol: float, ball: BallSpec) -> tuple[ExpPoly, float]:
        dirs = self.directions()
        r = ball.radius
        dual = ball.norm_tag.dual
        items = list(f._terms.items())
        if not items:
            return f, 0.0
        pure = [(k, p) for k, p in items if p.is_constant()]
        mixed = [(k, p) for k, p in items if not p.is_constant()]
        out = []
        err_total = 0.0
        per_term = tol / len(items)
        if pure:
            phis = np.array([k for k, _ in pure], dtype=complex).reshape(len(pure), self.dim)
            g, gerr = self.eigenvalues(phis, per_term / max(n, 1))
            coefs = np.array([p.constant_term() for _, p in pure])
            gn = g**n
            for (k, p), c, gv, e in zip(pure, coefs, gn, gerr):
                out.append((Polynomial.constant(self.dim, c * gv), k))
            if n == 1:
                sizes = np.abs(coefs) * np.exp([vector_norm(k, dual) * r for k, _ in pure])
                err_total += float((sizes * gerr).sum())
        for k, p in mixed:
            d = p.degree
            scale = math.exp(vector_norm(k, dual) * r)
            weights = [_deriv_norm_bound(p, order, dirs, r) * scale for order in range(d + 1)]
            beta, err = self.local_symbol(k, d, per_term / max(n, 1), weights)
            gamma = _trunc_power(beta, n, d) if n > 1 else beta
            q = Polynomial(self.dim)
            for m, c in gamma.items():
                q = q + _apply_derivatives(p, dirs, m).scale(c)
            out.append((q, k))
            if n == 1:
                err_total += err
        return ExpPoly(self.dim, out, f.norm_tag), err_total

    def apply_inverse(self, f: ExpPoly, margin: float, tol: float = 1e-12, power: int = 1) -> ExpPoly:
        """``S^power f`` on pure-exponential spans whose exponents lie in V."""
        if power < 0:
            raise ValueError("power must be >= 0")
        items = list(f._terms.items())
        if not items:
            return f
        if any(not p.is_constant() for _, p in items):
            raise RegionError("apply_inverse needs constant polynomial parts (f in span{e^psi})")
        phis = np.array([k for k, _ in items], dtype=complex).reshape(len(items), self.dim)
        g, err = self.eigenvalues(phis, min(tol, margin / 4))
        bad = np.flatnonzero(np.abs(g) - err < 1 + margin)
        if bad.size:
            i = int(bad[0])
            raise RegionError(f"exponent not in V: |g| = {abs(g[i]):.6g} at {items[i][0]}")
        out = [(Polynomial.constant(self.dim, p.constant_term() / gv**power), k)
               for (k, p), gv in zip(items, g)]
        return ExpPoly(self.dim, out, f.norm_tag)

    def iterate_inverse(self, f: ExpPoly, n: int, margin: float, tol: float = 1e-12) -> ExpPoly:
        return self.apply_inverse(f, margin, tol, power=n)


@dataclass(frozen=True)
class SingleOp(Operator):
    """``Phi_a(D) f = sum_n c_n d^n f(.)(a)``."""

    symbol: Symbol
    a: Point

    def __post_init__(self):
        if self.a.is_zero():
            raise ValueError("direction a must be non-zero")

    @property
    def dim(self) -> int:
        return self.a.dim

    def directions(self):
        return [self.a]

    def symbols(self):
        return [self.symbol]

    def eigenvalue(self, phi, tol=1e-14):
        return self.symbol.eval_derivative(0, phi.pair(self.a), tol)

    def eigenvalues(self, phis, tol=1e-14):
        lam = np.asarray(phis, dtype=complex) @ self.a.array()
        g = _symbol_values(self.symbol, lam)
        if g is not None:
            return g, np.zeros(len(lam))
        return super().eigenvalues(phis, tol)

    def local_symbol(self, phi_coords, degree, tol, weights):
        lam = sum((c * x for c, x in zip(phi_coords, self.a.coords)), 0j)
        beta, err = {}, 0.0
        for k in range(degree + 1):
            w = max(weights[k], 1e-300)
            v, e = self.symbol.eval_derivative(k, lam, tol * math.factorial(k) / ((degree + 1) * w))
            beta[(k,)] = v / math.factorial(k)
            err += e / math.factorial(k) * weights[k]
        return beta, err

    def modulus_bounds(self, phi0, delta):
        return self.symbol.modulus_bounds(phi0.pair(self.a), delta * self.a.norm())

    def growth_bound(self, n: int, ball: BallSpec) -> tuple[float, float]:
        """``(C, r')`` with ``||T^n f||_r <= C^n ||f||_{r'}`` (Cauchy estimates, rho = 2R)."""
        if n == 0:
            return 1.0, ball.radius
        cert = self.symbol.certificate
        rho = 2 * cert.R
        C = cert.M / (1 - cert.R / rho)
        return C, ball.radius + rho * n * self.a.norm()


@dataclass(frozen=True)
class MultiOp(Operator):
    """``Phi^1_{b_1}(D) + ... + Phi^r_{b_r}(D)`` with independent directions."""

    parts: tuple

    def __post_init__(self):
        parts = tuple((s, b) for s, b in self.parts)
        object.__setattr__(self, "parts", parts)
        if not parts:
            raise ValueError("need at least one (symbol, direction) pair")
        dims = {b.dim for _, b in parts}
        if len(dims) != 1:
            raise ValueError("directions must share a dimension")
        mat = np.array([b.coords for _, b in parts], dtype=complex)
        if np.linalg.matrix_rank(mat) < len(parts):
            raise ValueError("directions must be linearly independent")

    @property
    def dim(self):
        return self.parts[0][1].dim

    def directions(self):
        return [b for _, b in self.parts]

    def symbols(self):
        return [s for s, _ in self.parts]

    def eigenvalue(self, phi, tol=1e-14):
        total, err = 0j, 0.0
        for s, b in self.parts:
            v, e = s.eval_derivative(0, phi.pair(b), tol / len(self.parts))
            total += v
            err += e
        return total, err

    def eigenvalues(self, phis, tol=1e-14):
        phis = np.asarray(phis, dtype=complex)
        total = np.zeros(len(phis), dtype=complex)
        for s, b in self.parts:
            vals = _symbol_values(s, phis @ b.array())
            if vals is None:
                return super().eigenvalues(phis, tol)
            total += vals
        return total, np.zeros(len(phis))

    def local_symbol(self, phi_coords, degree, tol, weights):
        r = len(self.parts)
        beta: dict = {}
        err = 0.0
        zero = (0,) * r
        for i, (s, b) in enumerate(self.parts):
            lam = sum((c * x for c, x in zip(phi_coords, b.coords)), 0j)
            for k in range(degree + 1):
                w = max(weights[k], 1e-300)
                v, e = s.eval_derivative(k, lam, tol * math.factorial(k) / (r * (degree + 1) * w))
                m = zero if k == 0 else tuple(k if j == i else 0 for j in range(r))
                beta[m] = beta.get(m, 0j) + v / math.factorial(k)
                err += e / math.factorial(k) * weights[k]
        return beta, err

    def modulus_bounds(self, phi0, delta):
        g, err = self.eigenvalue(phi0)
        pert = err + sum(s.perturbation(phi0.pair(b), delta * b.norm()) for s, b in self.parts)
        return max(0.0, abs(g) - pert), abs(g) + pert


@dataclass(frozen=True)
class VaryingOp(Operator):
    """``f -> sum_n c_n d^n f(.)(b_n)`` with ``b_n = rule(n)`` and ``||b_n|| <= bound``."""

    symbol: Symbol
    rule: DirectionRule
    bound: Optional[float] = None

    def __post_init__(self):
        if self.rule.base.is_zero():
            raise ValueError("directions b_n must be non-zero")
        sup = self.rule.sup_norm()
        if self.bound is None:
            object.__setattr__(self, "bound", sup)
        elif self.bound < sup * (1 - 1e-12):
            raise ValueError(f"bound {self.bound} below sup ||b_n|| = {sup}")

    @property
    def dim(self):
        return self.rule.base.dim

    def directions(self):
        return [self.rule.base]

    def symbols(self):
        return [self.symbol]

    def _truncation(self, phi_norm: float, tol: float, k_max: int,
                    weights: Sequence[float]) -> tuple[int, float]:
        cert = self.symbol.certificate
        x = cert.R * phi_norm * self.bound
        shrink = self.bound / self.rule.base.norm()
        if x > 700:
            raise ToleranceError(f"series at ||phi|| = {phi_norm:g} overflows double precision")

        def tail(n0):
            return sum(w * cert.M * (cert.R * shrink) ** k / math.factorial(k) * exp_tail(x, n0 - k)
                       for k, w in enumerate(weights) if w)

        # the tail decreases in n0: bracket by doubling, then bisect
        lo, hi = k_max - 1, k_max
        while tail(hi) > tol:
            lo, hi = hi, 2 * hi + 1
            if lo > SERIES_TERM_CAP:
                raise ToleranceError(f"tolerance {tol:g} unreachable within {SERIES_TERM_CAP} terms")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            lo, hi = (lo, mid) if tail(mid) <= tol else (mid, hi)
        return hi, tail(hi)

    def eigenvalue(self, phi, tol=1e-14):
        n0, err = self._truncation(phi.dual_norm(), tol, 0, [1.0])
        lam1 = phi.pair(self.rule.base)
        total, mass = 0j, 0.0
        for n in range(n0 + 1):
            term = _scaled_power(self.symbol.coeff(n), lam1 * self.rule.scale(n), n)
            total += term
            mass += abs(term)
        # cancellation in the alternating sum costs relative accuracy
        return complex(total), float(err + 4 * (n0 + 1) * UNIT_ROUNDOFF * mass)

    def eigenvalues(self, phis, tol=1e-14):
        phis = np.asarray(phis, dtype=complex)
        if len(phis) == 0:
            return np.zeros(0, dtype=complex), np.zeros(0)
        tag = self.rule.base.norm_tag.dual
        # one truncation at the largest norm bounds every row
        n0, err = self._truncation(max(vector_norm(row, tag) for row in phis), tol, 0, [1.0])
        lam1 = phis @ np.asarray(self.rule.base.coords, dtype=complex)
        total = np.zeros(len(phis), dtype=complex)
        mass = np.zeros(len(phis))
        for n in range(n0 + 1):
            term = _scaled_power(self.symbol.coeff(n), lam1 * self.rule.scale(n), n)
            total += term
            mass += np.abs(term)
        return total, err + 4 * (n0 + 1) * UNIT_ROUNDOFF * mass

    def local_symbol(self, phi_coords, degree, tol, weights):
        phi = Covector(phi_coords, self.rule.base.norm_tag)
        n0, err = self._truncation(phi.dual_norm(), tol, degree, weights)
        lam1 = phi.pair(self.rule.base)
        beta = {}
        for k in range(degree + 1):
            total = 0j
            for n in range(k, n0 + 1):
                s = self.rule.scale(n)
                total += _scaled_power(self.symbol.coeff(n) * math.comb(n, k) * s**k, lam1 * s, n - k)
            beta[(k,)] = total
        return beta, err

    def modulus_bounds(self, phi0, delta):
        g, err = _cached_eigenvalue(self, phi0)
        cert = self.symbol.certificate
        L = phi0.dual_norm() * self.bound
        pert = err + cert.M * math.exp(cert.R * L) * math.expm1(cert.R * delta * self.bound)
        return max(0.0, abs(g) - pert), abs(g) + pert


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _cached_eigenvalue(op: "VaryingOp", phi0: Covector) -> tuple[complex, float]:
    return op.eigenvalue(phi0, 1e-14)


def _scaled_power(c, z, n: int):
    """``c * z**n`` without overflow in the intermediate power."""
    if n == 0 or c == 0:
        return c if n == 0 else c * 0
    if not isinstance(z, np.ndarray):
        return 0j if z == 0 else cmath.exp(cmath.log(c) + n * cmath.log(z))
    z = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(np.log(complex(c)) + n * np.log(z))
    return np.where(z == 0, 0j, out)


def _symbol_values(s: Symbol, lam: np.ndarray) -> Optional[np.ndarray]:
    if s.kind is SymbolKind.EXP:
        return np.exp(lam)
    if s.kind is SymbolKind.SCALED_EXP:
        return np.exp(s.b * lam)
    if s.tail is None:
        out = np.zeros_like(lam, dtype=complex)
        for c in reversed(s.coeffs):
            out = out * lam + c
        return out
    return None


def _trunc_power(beta: dict, n: int, degree: int) -> dict:
    """``beta^n`` in the commutative algebra truncated at total degree ``degree``."""
    def mul(x, y):
        out: dict = {}
        for a, c in x.items():
            for b, d in y.items():
                m = tuple(i + j for i, j in zip(a, b))
                if sum(m) <= degree:
                    out[m] = out.get(m, 0j) + c * d
        return out

    r = len(next(iter(beta)))
    result = {(0,) * r: 1 + 0j}
    base = beta
    while n:
        if n & 1:
            result = mul(result, base)
        n >>= 1
        if n:
            base = mul(base, base)
    return result


def _apply_derivatives(p: Polynomial, dirs: Sequence[Point], m: tuple) -> Polynomial:
    q = p
    for b, k in zip(dirs, m):
        for _ in range(k):
            q = q.directional_derivative(b)
            if q.is_zero():
                return q
    return q


def _deriv_norm_bound(p: Polynomial, order: int, dirs: Sequence[Point], r: float) -> float:
    """Bound of ``sup_r |D^m p|`` over all multi-indices m of the given order."""
    bmax = max(max(abs(c) for c in b.coords) for b in dirs)
    rr = max(1.0, r)
    total = 0.0
    for alpha, c in p.terms.items():
        d = sum(alpha)
        if d >= order:
            total += abs(c) * _falling(d, order) * bmax**order * rr ** (d - order)
    return total


def _falling(n, k):
    out = 1
    for i in range(k):
        out *= n - i
    return out


# ---------------------------------------------------------------------------
# functional aliases
# ---------------------------------------------------------------------------


def eigenvalue(op: Operator, phi: Covector, tol: float = 1e-14) -> tuple[complex, float]:
    return op.eigenvalue(phi, tol)


def classify(op: Operator, phi: Covector, margin: float, tol: float = 1e-12) -> Classification:
    return op.classify(phi, margin, tol)


def apply(op: Operator, f: ExpPoly, tol: float = 1e-12, ball: BallSpec = BallSpec()) -> ExpPoly:
    return op.apply(f, tol, ball)


def iterate(op: Operator, f: ExpPoly, n: int, tol: float = 1e-12, ball: BallSpec = BallSpec()) -> ExpPoly:
    return op.iterate(f, n, tol, ball)


def apply_inverse(op: Operator, f: ExpPoly, margin: float, tol: float = 1e-12) -> ExpPoly:
    return op.apply_inverse(f, margin, tol)


def translate(f: ExpPoly, a: Point | Sequence[complex]) -> ExpPoly:
    return _translate(f, a)


def growth_bound(op: SingleOp, n: int, ball: BallSpec) -> tuple[float, float]:
    return op.growth_bound(n, ball)
