"""Entire symbols of exponential type with certified evaluation."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

SERIES_TERM_CAP = 10_000


class SymbolKind(Enum):
    EXP = "exp"
    SCALED_EXP = "scaled_exp"
    POLY = "poly"
    SERIES = "series"


class ToleranceError(ArithmeticError):
    """Requested accuracy cannot be reached within the iteration budget."""


@dataclass(frozen=True)
class TypeCertificate:
    """Majorant ``|c_n| <= M R^n / n!`` for all n."""

    M: float
    R: float

    def __post_init__(self):
        if not (self.M > 0 and self.R > 0):
            raise ValueError("certificate needs M > 0 and R > 0")


@dataclass(frozen=True)
class CertificateCheck:
    ok: bool
    violating_index: Optional[int] = None

    def __bool__(self):
        return self.ok


def exp_tail(x: float, K: int) -> float:
    """Upper bound for ``sum_{m > K} x^m / m!`` with ``x >= 0``."""
    if x < 0:
        raise ValueError("exp_tail needs x >= 0")
    if K < 0:
        return math.exp(x)
    if x == 0:
        return 0.0
    total = 0.0
    m = K + 1
    while True:
        log_term = m * math.log(x) - math.lgamma(m + 1)
        if log_term > 700:
            return math.inf  # still an upper bound, just a useless one
        term = math.exp(log_term)
        ratio = x / (m + 1)
        if ratio <= 0.5:
            return total + term / (1.0 - ratio)
        total += term
        m += 1


@dataclass(frozen=True)
class Symbol:
    """Entire function ``Phi(z) = sum c_n z^n`` given by a coefficient rule.

    ``SERIES`` symbols carry an explicit prefix ``c_0..c_K``; beyond it the
    coefficients are zero, or those of ``tail`` when the series was built
    as a prefix of a closed kind.
    """

    kind: SymbolKind
    b: complex = 1.0
    coeffs: tuple = ()
    tail: Optional["Symbol"] = None
    certificate: Optional[TypeCertificate] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))
        object.__setattr__(self, "b", complex(self.b))
        if self.kind is SymbolKind.SCALED_EXP and self.b == 0:
            raise ValueError("symbol is constant: SCALED_EXP needs b != 0")
        if self.kind in (SymbolKind.POLY, SymbolKind.SERIES) and self.tail is None:
            if not any(c != 0 for c in self.coeffs[1:]):
                raise ValueError("symbol is constant: need some c_n != 0 with n >= 1")
        if self.certificate is None:
            object.__setattr__(self, "certificate", self._default_certificate())

    # constructors ---------------------------------------------------------
    @classmethod
    def exp(cls) -> "Symbol":
        return cls(SymbolKind.EXP)

    @classmethod
    def scaled_exp(cls, b: complex) -> "Symbol":
        return cls(SymbolKind.SCALED_EXP, b=b)

    @classmethod
    def poly(cls, coeffs: Sequence[complex]) -> "Symbol":
        return cls(SymbolKind.POLY, coeffs=tuple(coeffs))

    @classmethod
    def series(cls, coeffs: Sequence[complex], tail: Optional["Symbol"] = None) -> "Symbol":
        return cls(SymbolKind.SERIES, coeffs=tuple(coeffs), tail=tail)

    @classmethod
    def prefix_of(cls, closed: "Symbol", K: int) -> "Symbol":
        return cls.series([closed.coeff(n) for n in range(K + 1)], tail=closed)

    @classmethod
    def parse(cls, text: str) -> "Symbol":
        """``exp``, ``exp*<re>,<im>``, ``poly:<re>,<im>;<re>,<im>;...``."""
        t = text.strip()
        if t == "exp":
            return cls.exp()
        if t.startswith("exp*"):
            return cls.scaled_exp(_parse_complex(t[4:]))
        if t.startswith("poly:"):
            return cls.poly([_parse_complex(c) for c in t[5:].split(";") if c.strip()])
        raise ValueError(f"unknown symbol syntax {text!r}")

    def to_text(self) -> str:
        if self.kind is SymbolKind.EXP:
            return "exp"
        if self.kind is SymbolKind.SCALED_EXP:
            return f"exp*{self.b.real!r},{self.b.imag!r}"
        return "poly:" + ";".join(f"{c.real!r},{c.imag!r}" for c in self.coeffs)

    # coefficients ---------------------------------------------------------
    def coeff(self, n: int) -> complex:
        if n < 0:
            raise ValueError("n >= 0 required")
        if self.kind is SymbolKind.EXP:
            return math.exp(-math.lgamma(n + 1)) if n > 170 else 1.0 / math.factorial(n)
        if self.kind is SymbolKind.SCALED_EXP:
            if n > 170:
                return cmath.exp(n * cmath.log(self.b) - math.lgamma(n + 1))
            return self.b**n / math.factorial(n)
        if n < len(self.coeffs):
            return self.coeffs[n]
        if self.kind is SymbolKind.SERIES and self.tail is not None:
            return self.tail.coeff(n)
        return 0j

    @property
    def is_closed(self) -> bool:
        return self.kind is not SymbolKind.SERIES or self.tail is None

    @property
    def degree(self) -> Optional[int]:
        """Polynomial degree, or None for transcendental symbols."""
        if self.kind in (SymbolKind.EXP, SymbolKind.SCALED_EXP):
            return None
        if self.kind is SymbolKind.SERIES and self.tail is not None:
            return None
        return max((n for n, c in enumerate(self.coeffs) if c != 0), default=0)

    def _default_certificate(self) -> TypeCertificate:
        if self.kind is SymbolKind.EXP:
            return TypeCertificate(1.0, 1.0)
        if self.kind is SymbolKind.SCALED_EXP:
            return TypeCertificate(1.0, abs(self.b))
        R = self.tail.certificate.R if self.tail is not None else 1.0
        M = max((abs(c) * math.exp(math.lgamma(n + 1) - n * math.log(R))
                 for n, c in enumerate(self.coeffs)), default=0.0)
        if self.tail is not None:
            M = max(M, self.tail.certificate.M)
        return TypeCertificate(max(M, 1e-300), R)

    def certificate_check(self, cert: TypeCertificate, n_max: int) -> CertificateCheck:
        """Check ``|c_n| <= M R^n/n!`` for ``n <= n_max`` and via the kind beyond."""
        for n in range(n_max + 1):
            if not _coeff_ok(self.coeff(n), n, cert):
                return CertificateCheck(False, n)
        if self.kind is SymbolKind.EXP:
            ok = cert.M >= 1 and cert.R >= 1
        elif self.kind is SymbolKind.SCALED_EXP:
            ok = cert.M >= 1 and cert.R >= abs(self.b)
        elif self.tail is None:
            # a polynomial: finitely many coefficients
            for n in range(n_max + 1, len(self.coeffs)):
                if not _coeff_ok(self.coeff(n), n, cert):
                    return CertificateCheck(False, n)
            ok = True
        else:
            for n in range(n_max + 1, len(self.coeffs)):
                if not _coeff_ok(self.coeff(n), n, cert):
                    return CertificateCheck(False, n)
            ok = bool(self.tail.certificate_check(cert, max(n_max, len(self.coeffs))))
        if not ok:
            return CertificateCheck(False, n_max + 1)
        return CertificateCheck(True)

    # evaluation -----------------------------------------------------------
    def __call__(self, lam: complex) -> complex:
        return self.eval_derivative(0, lam)[0]

    def eval_derivative(self, k: int, lam: complex, tol: float = 1e-14) -> tuple[complex, float]:
        """Return ``(Phi^{(k)}(lam), err)`` with ``err`` a certified bound."""
        if k < 0:
            raise ValueError("k >= 0 required")
        if tol <= 0:
            raise ValueError("tol > 0 required")
        lam = complex(lam)
        if self.kind is SymbolKind.EXP:
            return cmath.exp(lam), 0.0
        if self.kind is SymbolKind.SCALED_EXP:
            return self.b**k * cmath.exp(self.b * lam), 0.0
        if self.tail is None:
            total = 0j
            for n in range(len(self.coeffs) - 1, k - 1, -1):
                total = total * lam + self.coeffs[n] * falling(n, k)
            return total, 0.0
        return self._series_derivative(k, lam, tol)

    def _series_derivative(self, k: int, lam: complex, tol: float) -> tuple[complex, float]:
        cert = self.certificate
        x = cert.R * abs(lam)
        total = 0j
        n = k
        power = 1 + 0j
        while True:
            total += self.coeff(n) * falling(n, k) * power
            power *= lam
            if n >= len(self.coeffs) - 1:
                err = cert.M * cert.R**k * exp_tail(x, n - k)
                if err <= tol:
                    return total, err
            if n - k > SERIES_TERM_CAP:
                raise ToleranceError(f"tolerance {tol:g} unreachable within {SERIES_TERM_CAP} terms")
            n += 1

    # bounds over discs ----------------------------------------------------
    def perturbation(self, lam: complex, rho: float) -> float:
        """Upper bound of ``sup_{|w| <= rho} |Phi(lam + w) - Phi(lam)|``."""
        lam = complex(lam)
        if self.kind in (SymbolKind.EXP, SymbolKind.SCALED_EXP):
            b = self.b if self.kind is SymbolKind.SCALED_EXP else 1.0
            return abs(cmath.exp(b * lam)) * math.expm1(abs(b) * rho)
        if self.tail is None:
            total = 0.0
            for k in range(1, len(self.coeffs)):
                total += abs(self.eval_derivative(k, lam)[0]) * rho**k / math.factorial(k)
            return total
        cert = self.certificate
        return cert.M * math.exp(cert.R * abs(lam)) * math.expm1(cert.R * rho)

    def modulus_bounds(self, lam: complex, rho: float) -> tuple[float, float]:
        """Certified ``(lo, hi)`` for ``|Phi|`` on the closed disc of radius rho about lam."""
        lam = complex(lam)
        if self.kind in (SymbolKind.EXP, SymbolKind.SCALED_EXP):
            b = self.b if self.kind is SymbolKind.SCALED_EXP else 1.0
            re = (b * lam).real
            return math.exp(re - abs(b) * rho), math.exp(re + abs(b) * rho)
        val, err = self.eval_derivative(0, lam, 1e-14)
        pert = self.perturbation(lam, rho) + err
        return max(0.0, abs(val) - pert), abs(val) + pert


def falling(n: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= n - i
    return out


def _coeff_ok(c: complex, n: int, cert: TypeCertificate) -> bool:
    bound = cert.M * math.exp(n * math.log(cert.R) - math.lgamma(n + 1))
    return abs(c) <= bound * (1 + 1e-12)


def _parse_complex(text: str) -> complex:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) == 1:
        return complex(float(parts[0]), 0.0)
    if len(parts) != 2:
        raise ValueError(f"bad complex literal {text!r}")
    return complex(float(parts[0]), float(parts[1]))
