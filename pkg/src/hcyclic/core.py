"""Exact algebra of exponential-polynomials on C^N.

An :class:`ExpPoly` is a finite sum ``sum_i p_i(x) * exp(phi_i(x))`` with
``p_i`` a sparse :class:`Polynomial` and ``phi_i`` a :class:`Covector`.  The
canonical form keeps one term per exponent (bit-exact equality of the
covector components) and drops zero polynomial parts, which makes the
representation unique because the exponentials are linearly independent.
"""

from __future__ import annotations

import math
import re
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np


class NormTag(Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @property
    def dual(self) -> "NormTag":
        return _DUAL[self]

    @classmethod
    def parse(cls, text: str) -> "NormTag":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown norm tag {text!r} (expected l1, l2 or linf)") from None


_DUAL = {NormTag.L1: NormTag.LINF, NormTag.L2: NormTag.L2, NormTag.LINF: NormTag.L1}


def vector_norm(coords, tag: NormTag) -> float:
    a = np.abs(np.asarray(coords, dtype=complex))
    if tag is NormTag.L1:
        return float(a.sum())
    if tag is NormTag.L2:
        return math.hypot(*a)  # scaled, no underflow for tiny coordinates
    return float(a.max(initial=0.0))


def _as_coords(coords) -> tuple:
    if isinstance(coords, (int, float, complex)):
        coords = (coords,)
    out = tuple(complex(c) for c in coords)
    if not out:
        raise ValueError("need at least one coordinate")
    return out


class DimensionError(ValueError):
    pass


def _check_dim(n1: int, n2: int) -> None:
    if n1 != n2:
        raise DimensionError(f"dimension mismatch: {n1} vs {n2}")


@dataclass(frozen=True)
class Point:
    """A point of E = C^N carrying the norm used for balls."""

    coords: tuple
    norm_tag: NormTag = NormTag.L2

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_coords(self.coords))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def norm(self) -> float:
        return vector_norm(self.coords, self.norm_tag)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)

    def __add__(self, other: "Point") -> "Point":
        _check_dim(self.dim, other.dim)
        return Point(tuple(a + b for a, b in zip(self.coords, other.coords)), self.norm_tag)

    def scale(self, c: complex) -> "Point":
        return Point(tuple(c * a for a in self.coords), self.norm_tag)

    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=complex)


@dataclass(frozen=True)
class Covector:
    """A linear functional on C^N; ``norm_tag`` is the norm of the underlying space."""

    coords: tuple
    norm_tag: NormTag = NormTag.L2

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_coords(self.coords))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def pair(self, x: Point | Sequence[complex]) -> complex:
        xs = x.coords if isinstance(x, Point) else _as_coords(x)
        _check_dim(self.dim, len(xs))
        return sum((p * q for p, q in zip(self.coords, xs)), 0j)

    __call__ = pair

    def dual_norm(self) -> float:
        return vector_norm(self.coords, self.norm_tag.dual)

    def __add__(self, other: "Covector") -> "Covector":
        _check_dim(self.dim, other.dim)
        return Covector(tuple(a + b for a, b in zip(self.coords, other.coords)), self.norm_tag)

    def __sub__(self, other: "Covector") -> "Covector":
        _check_dim(self.dim, other.dim)
        return Covector(tuple(a - b for a, b in zip(self.coords, other.coords)), self.norm_tag)

    def __neg__(self) -> "Covector":
        return Covector(tuple(-a for a in self.coords), self.norm_tag)

    def scale(self, c: complex) -> "Covector":
        return Covector(tuple(c * a for a in self.coords), self.norm_tag)

    @classmethod
    def zero(cls, dim: int, norm_tag: NormTag = NormTag.L2) -> "Covector":
        return cls((0j,) * dim, norm_tag)

    @classmethod
    def basis(cls, j: int, dim: int, norm_tag: NormTag = NormTag.L2) -> "Covector":
        return cls(tuple(1.0 if i == j else 0.0 for i in range(dim)), norm_tag)


def dual_norm(phi: Covector) -> float:
    return phi.dual_norm()


def norm(x: Point) -> float:
    return x.norm()


def degree(alpha: Sequence[int]) -> int:
    return sum(alpha)


def grlex_key(alpha: Sequence[int]):
    return (sum(alpha), tuple(alpha))


def falling(n: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= n - i
    return out


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


class Polynomial:
    """Sparse polynomial in N complex variables, ``{alpha: coefficient}``."""

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Mapping[tuple, complex] | None = None):
        self.dim = dim
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim or any(a < 0 for a in alpha):
                raise ValueError(f"bad multi-index {alpha} for dimension {dim}")
            c = complex(c)
            if c != 0:
                clean[alpha] = clean.get(alpha, 0j) + c
        self.terms = {a: c for a, c in clean.items() if c != 0}

    @classmethod
    def constant(cls, dim: int, c: complex = 1.0) -> "Polynomial":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def monomial(cls, alpha: Sequence[int], c: complex = 1.0) -> "Polynomial":
        return cls(len(alpha), {tuple(alpha): c})

    @classmethod
    def variable(cls, j: int, dim: int) -> "Polynomial":
        return cls.monomial(tuple(1 if i == j else 0 for i in range(dim)))

    @classmethod
    def linear(cls, coeffs: Sequence[complex]) -> "Polynomial":
        dim = len(coeffs)
        return cls(dim, {tuple(1 if i == j else 0 for i in range(dim)): c for j, c in enumerate(coeffs)})

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(a) == 0 for a in self.terms)

    def constant_term(self) -> complex:
        return self.terms.get((0,) * self.dim, 0j)

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]))

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.dim == other.dim and self.terms == other.terms

    def __hash__(self):
        return hash((self.dim, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            return "Polynomial(0)"
        parts = []
        for alpha, c in self.sorted_terms():
            mono = "*".join(f"x{j + 1}^{a}" if a > 1 else f"x{j + 1}" for j, a in enumerate(alpha) if a)
            parts.append(f"({c:.6g})" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        _check_dim(self.dim, other.dim)
        out = dict(self.terms)
        for a, c in other.terms.items():
            out[a] = out.get(a, 0j) + c
        return Polynomial(self.dim, out)

    def __neg__(self) -> "Polynomial":
        return self.scale(-1)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def scale(self, c: complex) -> "Polynomial":
        c = complex(c)
        if c == 0:
            return Polynomial(self.dim)
        return Polynomial(self.dim, {a: c * v for a, v in self.terms.items()})

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        _check_dim(self.dim, other.dim)
        out: dict = defaultdict(complex)
        for a, c in self.terms.items():
            for b, d in other.terms.items():
                out[tuple(i + j for i, j in zip(a, b))] += c * d
        return Polynomial(self.dim, out)

    def __call__(self, x) -> complex:
        xs = x.coords if isinstance(x, Point) else _as_coords(x)
        _check_dim(self.dim, len(xs))
        total = 0j
        for alpha, c in self.terms.items():
            v = c
            for xi, a in zip(xs, alpha):
                if a:
                    v *= xi**a
            total += v
        return total

    def partial(self, j: int) -> "Polynomial":
        out = {}
        for alpha, c in self.terms.items():
            if alpha[j]:
                beta = list(alpha)
                beta[j] -= 1
                out[tuple(beta)] = c * alpha[j]
        return Polynomial(self.dim, out)

    def directional_derivative(self, b: Point | Sequence[complex]) -> "Polynomial":
        bs = b.coords if isinstance(b, Point) else _as_coords(b)
        _check_dim(self.dim, len(bs))
        out: dict = defaultdict(complex)
        for alpha, c in self.terms.items():
            for j, a in enumerate(alpha):
                if a and bs[j] != 0:
                    beta = list(alpha)
                    beta[j] -= 1
                    out[tuple(beta)] += c * a * bs[j]
        return Polynomial(self.dim, out)

    def coef_abs_sum(self) -> float:
        return float(sum(abs(c) for c in self.terms.values()))

    def sup_upper(self, r: float) -> float:
        """Triangle-inequality bound of sup |p| over ``max|x_j| <= r``."""
        return float(sum(abs(c) * r ** sum(a) for a, c in self.terms.items()))


def shift_poly(p: Polynomial, a: Point | Sequence[complex]) -> Polynomial:
    """Exact binomial expansion of ``x -> p(x + a)``."""
    as_ = a.coords if isinstance(a, Point) else _as_coords(a)
    _check_dim(p.dim, len(as_))
    out: dict = defaultdict(complex)
    for alpha, c in p.terms.items():
        # per-variable expansion (x_j + a_j)^{alpha_j} = sum_i C(alpha_j, i) a_j^{alpha_j - i} x_j^i
        choices = []
        for aj, n in zip(as_, alpha):
            opts = []
            for i in range(n + 1):
                w = math.comb(n, i) * (aj ** (n - i) if n - i else 1)
                if w != 0:
                    opts.append((i, w))
            choices.append(opts)
        for combo in product(*choices):
            w = c
            for _, wj in combo:
                w *= wj
            out[tuple(i for i, _ in combo)] += w
    return Polynomial(p.dim, out)


def polarize(alpha: Sequence[int]) -> list[tuple[Fraction, tuple, int]]:
    """Write ``x^alpha`` as ``sum weight * psi(x)^k`` with integer covectors ``psi``.

    Uses ``z_1...z_k = (2^k k!)^{-1} sum_eps (prod eps)(sum eps_j z_j)^k`` with
    the factors ``z`` running over the variables repeated per ``alpha``.
    Terms sharing a direction are merged after reducing ``psi`` to a primitive
    integer vector whose first non-zero entry is positive.
    """
    alpha = tuple(int(a) for a in alpha)
    k = sum(alpha)
    if k < 1:
        raise ValueError("polarize needs |alpha| >= 1")
    base = Fraction(1, 2**k * math.factorial(k))
    merged: dict = defaultdict(Fraction)
    ranges = [range(a + 1) for a in alpha]
    for plus in product(*ranges):
        psi = [2 * p - a for p, a in zip(plus, alpha)]
        if not any(psi):
            continue
        w = base
        for p, a in zip(plus, alpha):
            w *= math.comb(a, p) * (-1) ** (a - p)
        g = 0
        for c in psi:
            g = math.gcd(g, abs(c))
        psi = [c // g for c in psi]
        w *= g**k
        first = next(c for c in psi if c)
        if first < 0:
            psi = [-c for c in psi]
            w *= (-1) ** k
        merged[tuple(psi)] += w
    return [(w, psi, k) for psi, w in sorted(merged.items()) if w != 0]


# ---------------------------------------------------------------------------
# Exponential polynomials
# ---------------------------------------------------------------------------


class ExpPoly:
    """Canonical finite sum ``sum_i p_i(x) exp(phi_i(x))`` on C^N.

    Instances are treated as immutable values.
    """

    def __init__(self, dim: int, terms: Iterable[tuple[Polynomial, Covector | Sequence[complex]]] = (),
                 norm_tag: NormTag = NormTag.L2):
        self.dim = dim
        self.norm_tag = norm_tag
        merged: dict = {}
        for p, phi in terms:
            key = phi.coords if isinstance(phi, Covector) else _as_coords(phi)
            _check_dim(dim, len(key))
            _check_dim(dim, p.dim)
            merged[key] = merged[key] + p if key in merged else p
        self._terms = {k: p for k, p in merged.items() if not p.is_zero()}
        self._packed = None

    # constructors ---------------------------------------------------------
    @classmethod
    def zero(cls, dim: int, norm_tag: NormTag = NormTag.L2) -> "ExpPoly":
        return cls(dim, (), norm_tag)

    @classmethod
    def from_polynomial(cls, p: Polynomial, norm_tag: NormTag = NormTag.L2) -> "ExpPoly":
        return cls(p.dim, [(p, (0j,) * p.dim)], norm_tag)

    @classmethod
    def exponential(cls, phi: Covector | Sequence[complex], c: complex = 1.0,
                    norm_tag: NormTag | None = None) -> "ExpPoly":
        if isinstance(phi, Covector):
            norm_tag = norm_tag or phi.norm_tag
            coords = phi.coords
        else:
            coords = _as_coords(phi)
        dim = len(coords)
        return cls(dim, [(Polynomial.constant(dim, c), coords)], norm_tag or NormTag.L2)

    @classmethod
    def from_exponentials(cls, pairs: Iterable[tuple[complex, Sequence[complex]]], dim: int,
                          norm_tag: NormTag = NormTag.L2) -> "ExpPoly":
        return cls(dim, [(Polynomial.constant(dim, w), phi) for w, phi in pairs], norm_tag)

    # accessors ------------------------------------------------------------
    @property
    def terms(self) -> list[tuple[Polynomial, Covector]]:
        return [(p, Covector(k, self.norm_tag)) for k, p in self._sorted_items()]

    def _sorted_items(self):
        return sorted(self._terms.items(), key=lambda kv: _phi_key(kv[0]))

    def exponents(self) -> list[tuple]:
        return [k for k, _ in self._sorted_items()]

    def poly_at(self, phi: Covector | Sequence[complex]) -> Polynomial:
        key = phi.coords if isinstance(phi, Covector) else _as_coords(phi)
        return self._terms.get(key, Polynomial(self.dim))

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_pure_exponential(self) -> bool:
        return all(p.is_constant() for p in self._terms.values())

    @property
    def degree(self) -> int:
        return max((p.degree for p in self._terms.values()), default=0)

    def __eq__(self, other) -> bool:
        return isinstance(other, ExpPoly) and self.dim == other.dim and self._terms == other._terms

    def __repr__(self) -> str:
        if not self._terms:
            return "ExpPoly(0)"
        return " + ".join(f"[{p!r}]*exp({_fmt_phi(k)})" for k, p in self._sorted_items())

    def canonicalize(self) -> "ExpPoly":
        return ExpPoly(self.dim, ((p, k) for k, p in self._terms.items()), self.norm_tag)

    # arithmetic -----------------------------------------------------------
    def _check(self, other: "ExpPoly") -> None:
        _check_dim(self.dim, other.dim)
        if self.norm_tag is not other.norm_tag:
            raise ValueError("norm tag mismatch")

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        self._check(other)
        pairs = [(p, k) for k, p in self._terms.items()] + [(p, k) for k, p in other._terms.items()]
        return ExpPoly(self.dim, pairs, self.norm_tag)

    def __neg__(self) -> "ExpPoly":
        return self.scale(-1)

    def __sub__(self, other: "ExpPoly") -> "ExpPoly":
        return self + (-other)

    def scale(self, c: complex) -> "ExpPoly":
        return ExpPoly(self.dim, ((p.scale(c), k) for k, p in self._terms.items()), self.norm_tag)

    def __mul__(self, other: "ExpPoly") -> "ExpPoly":
        self._check(other)
        pairs = []
        for k1, p1 in self._terms.items():
            for k2, p2 in other._terms.items():
                pairs.append((p1 * p2, tuple(a + b for a, b in zip(k1, k2))))
        return ExpPoly(self.dim, pairs, self.norm_tag)

    def map_terms(self, fn) -> "ExpPoly":
        """Apply ``fn(poly, phi_coords) -> (poly, phi_coords)`` termwise."""
        return ExpPoly(self.dim, (fn(p, k) for k, p in self._terms.items()), self.norm_tag)

    def directional_derivative(self, b: Point | Sequence[complex]) -> "ExpPoly":
        bs = b.coords if isinstance(b, Point) else _as_coords(b)
        _check_dim(self.dim, len(bs))

        def d(p, k):
            lam = sum((f * x for f, x in zip(k, bs)), 0j)
            return p.directional_derivative(bs) + p.scale(lam), k

        return self.map_terms(d)

    # evaluation -----------------------------------------------------------
    def __call__(self, x) -> complex:
        xs = x.coords if isinstance(x, Point) else _as_coords(x)
        _check_dim(self.dim, len(xs))
        total = 0j
        for k, p in self._terms.items():
            total += p(xs) * np.exp(sum((f * v for f, v in zip(k, xs)), 0j))
        return complex(total)

    def _pack(self):
        if self._packed is None:
            items = self._sorted_items()
            phis = np.array([k for k, _ in items], dtype=complex).reshape(len(items), self.dim)
            alphas = sorted({a for _, p in items for a in p.terms}, key=grlex_key)
            index = {a: i for i, a in enumerate(alphas)}
            coef = np.zeros((len(alphas), len(items)), dtype=complex)
            for t, (_, p) in enumerate(items):
                for a, c in p.terms.items():
                    coef[index[a], t] = c
            self._packed = (phis, alphas, coef)
        return self._packed

    def eval_many(self, xs, chunk: int = 512) -> np.ndarray:
        """Evaluate at the rows of ``xs`` (shape (S, N))."""
        xs = np.atleast_2d(np.asarray(xs, dtype=complex))
        _check_dim(self.dim, xs.shape[1])
        out = np.zeros(xs.shape[0], dtype=complex)
        if not self._terms:
            return out
        phis, alphas, coef = self._pack()
        step = max(1, min(chunk, 4_000_000 // max(1, len(self._terms))))
        for s in range(0, xs.shape[0], step):
            blk = xs[s:s + step]
            expo = np.exp(blk @ phis.T)
            acc = np.zeros(blk.shape[0], dtype=complex)
            for i, a in enumerate(alphas):
                mono = np.ones(blk.shape[0], dtype=complex)
                for j, aj in enumerate(a):
                    if aj:
                        mono = mono * blk[:, j] ** aj
                acc += mono * (expo @ coef[i])
            out[s:s + step] = acc
        return out

    # bookkeeping used by the certified bounds -----------------------------
    def exponent_norms(self) -> np.ndarray:
        return np.array([vector_norm(k, self.norm_tag.dual) for k, _ in self._sorted_items()])

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for p in self._terms.values() for c in p.terms.values()), default=0.0)


def _phi_key(k: tuple):
    return tuple((c.real, c.imag) for c in k)


def _fmt_phi(k: tuple) -> str:
    return "(" + ", ".join(f"{c:.6g}" for c in k) + ")"


def translate(f: ExpPoly, a: Point | Sequence[complex]) -> ExpPoly:
    """Exact translation ``x -> f(x + a)``."""
    as_ = a.coords if isinstance(a, Point) else _as_coords(a)
    _check_dim(f.dim, len(as_))

    def t(p, k):
        lam = sum((c * x for c, x in zip(k, as_)), 0j)
        return shift_poly(p, as_).scale(np.exp(lam)), k

    return f.map_terms(t)


# ---------------------------------------------------------------------------
# Text serialization
# ---------------------------------------------------------------------------


def _fmt_float(v: float) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 2**53:
        return str(int(v))  # also folds -0.0 into "0"
    return repr(v)


def dumps(f: ExpPoly) -> str:
    """One term per line: ``re im : alpha_1 .. alpha_N : phi_1_re phi_1_im ..``."""
    lines = []
    for k, p in f._sorted_items():
        phi = " ".join(f"{_fmt_float(c.real)} {_fmt_float(c.imag)}" for c in k)
        for alpha, c in p.sorted_terms():
            lines.append(f"{_fmt_float(c.real)} {_fmt_float(c.imag)} : "
                         f"{' '.join(str(a) for a in alpha)} : {phi}")
    return "\n".join(lines) + ("\n" if lines else "")


def loads(text: str, dim: int | None = None, norm_tag: NormTag = NormTag.L2) -> ExpPoly:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [s.split() for s in line.split(":")]
        if len(parts) != 3 or len(parts[0]) != 2:
            raise ValueError(f"line {lineno}: expected 're im : alpha.. : phi..'")
        try:
            c = complex(float(parts[0][0]), float(parts[0][1]))
            alpha = tuple(int(a) for a in parts[1])
            vals = [float(v) for v in parts[2]]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if len(vals) != 2 * len(alpha):
            raise ValueError(f"line {lineno}: exponent needs {2 * len(alpha)} reals, got {len(vals)}")
        if dim is None:
            dim = len(alpha)
        elif len(alpha) != dim:
            raise ValueError(f"line {lineno}: dimension {len(alpha)} != {dim}")
        phi = tuple(complex(vals[2 * j], vals[2 * j + 1]) for j in range(dim))
        pairs.append((Polynomial.monomial(alpha, c), phi))
    if dim is None:
        raise ValueError("empty ExpPoly text needs an explicit dimension")
    return ExpPoly(dim, pairs, norm_tag)


def parse_expr(text: str, dim: int, norm_tag: NormTag = NormTag.L2) -> ExpPoly:
    """Parse a small literal like ``x1^2 + 2*x2 - exp(-x1)`` (used by configs).

    Grammar: sum of products of numbers, variables ``x1..xN`` (``z`` for x1),
    powers ``^`` and ``exp(<linear form>)``.  Evaluated with exact ExpPoly
    arithmetic, so only exponential-polynomials can be written.
    """
    return _ExprParser(text, dim, norm_tag).parse()


class _ExprParser:
    def __init__(self, text, dim, norm_tag):
        self.toks = re.findall(r"\d+\.\d*(?:[eE][-+]?\d+)?|\d*\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?"
                               r"|exp|x\d+|z|i|[-+*/^()]", text.replace(" ", ""))
        if "".join(self.toks) != text.replace(" ", ""):
            raise ValueError(f"cannot tokenize expression {text!r}")
        self.pos = 0
        self.dim = dim
        self.tag = norm_tag

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, tok=None):
        t = self.peek()
        if tok is not None and t != tok:
            raise ValueError(f"expected {tok!r}, got {t!r}")
        self.pos += 1
        return t

    def const(self, c):
        return ExpPoly.from_polynomial(Polynomial.constant(self.dim, c), self.tag)

    def parse(self):
        e = self.expr()
        if self.peek() is not None:
            raise ValueError(f"unexpected token {self.peek()!r}")
        return e

    def expr(self):
        sign = 1
        if self.peek() in ("+", "-"):
            sign = -1 if self.take() == "-" else 1
        out = self.term().scale(sign)
        while self.peek() in ("+", "-"):
            op = self.take()
            t = self.term()
            out = out + t if op == "+" else out - t
        return out

    def term(self):
        out = self.power()
        while self.peek() in ("*", "/"):
            op = self.take()
            rhs = self.power()
            if op == "/":
                c = _as_scalar(rhs)
                out = out.scale(1 / c)
            else:
                out = out * rhs
        return out

    def power(self):
        base = self.atom()
        if self.peek() == "^":
            self.take()
            n = int(self.take())
            out = self.const(1.0)
            for _ in range(n):
                out = out * base
            return out
        return base

    def atom(self):
        t = self.take()
        if t is None:
            raise ValueError("unexpected end of expression")
        if t == "(":
            e = self.expr()
            self.take(")")
            return e
        if t == "-":
            return self.atom().scale(-1)
        if t == "exp":
            self.take("(")
            inner = self.expr()
            self.take(")")
            c0, coeffs = _as_linear(inner, self.dim)
            return ExpPoly.exponential(coeffs, np.exp(c0), self.tag)
        if t == "i":
            return self.const(1j)
        if t == "z" or t.startswith("x"):
            j = 0 if t == "z" else int(t[1:]) - 1
            if not 0 <= j < self.dim:
                raise ValueError(f"variable {t} out of range for dimension {self.dim}")
            return ExpPoly.from_polynomial(Polynomial.variable(j, self.dim), self.tag)
        try:
            return self.const(float(t))
        except ValueError:
            raise ValueError(f"unexpected token {t!r}") from None


def _as_scalar(e: ExpPoly) -> complex:
    if e.is_zero():
        raise ZeroDivisionError("division by zero")
    if len(e) != 1 or not e.is_pure_exponential() or any(e.exponents()[0]):
        raise ValueError("can only divide by constants")
    return e.terms[0][0].constant_term()


def _as_linear(e: ExpPoly, dim: int):
    if e.is_zero():
        return 0j, (0j,) * dim
    if len(e) != 1 or any(e.exponents()[0]) or e.degree > 1:
        raise ValueError("exp() argument must be an affine form")
    p = e.terms[0][0]
    coeffs = [0j] * dim
    for alpha, c in p.terms.items():
        if sum(alpha) == 1:
            coeffs[alpha.index(1)] = c
    return p.constant_term(), tuple(coeffs)
