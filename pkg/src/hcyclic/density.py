"""Constructive density: approximating ExpPolys by exponentials from a region.

Two monomial engines live here.  :func:`approx_power` is the classical
difference quotient

    g_t = (e^{t phi} - 1 - t phi - ... - (t phi)^{k-1}/(k-1)!) / t^k,

whose distance to ``phi^k/k!`` on the ball of radius r is at most
``t * exp(||phi|| r)``, with the lower powers filled in recursively.
:func:`approx_power_contour` discretizes the Cauchy integral
``y^k/k! = (2 pi i)^{-1} \\oint e^{s y} s^{-k-1} ds`` on a circle of radius
rho; its aliasing error decays factorially in the node count and its
weights grow only like ``rho^{-k}``, so the full pipeline
:func:`approx_in_region` runs on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .core import Covector, ExpPoly, NormTag, Polynomial, polarize, vector_norm
from .operators import Operator, Region
from .seminorm import BallSpec
from .symbols import ToleranceError, exp_tail

UNIT_ROUNDOFF = 2.0**-53
T_FLOOR = 1e-8
FALLBACK_RATIO = 0.8
DEFAULT_SHARES = (0.25, 0.25, 0.25, 0.25)


class RegionSearchError(RuntimeError):
    """No certified region ball was found within the search budget."""


@dataclass(frozen=True)
class RegionBall:
    """Dual-norm ball ``{psi : ||psi - center|| < radius}`` certified inside a region."""

    center: Covector
    radius: float
    region: Region
    margin: float
    modulus_lo: float = 0.0
    modulus_hi: float = math.inf

    def contains(self, psi) -> bool:
        coords = psi.coords if isinstance(psi, Covector) else tuple(psi)
        d = vector_norm(np.asarray(coords) - np.asarray(self.center.coords), self.center.norm_tag.dual)
        return d < self.radius


@dataclass(frozen=True)
class ExpCombo:
    """``sum_i w_i exp(psi_i)`` with a certified sup-distance to its target."""

    weights: np.ndarray
    exponents: np.ndarray
    truncation_error: float
    rounding_error: float
    ball: BallSpec
    dim: int
    norm_tag: NormTag = NormTag.L2
    info: dict = field(default_factory=dict, compare=False)

    @property
    def certified_error(self) -> float:
        return self.truncation_error + self.rounding_error

    def __len__(self) -> int:
        return len(self.weights)

    def to_exppoly(self) -> ExpPoly:
        return ExpPoly.from_exponentials(
            ((complex(w), tuple(row)) for w, row in zip(self.weights, self.exponents)),
            self.dim, self.norm_tag)

    @classmethod
    def empty(cls, dim: int, ball: BallSpec, norm_tag: NormTag = NormTag.L2) -> "ExpCombo":
        return cls(np.zeros(0, dtype=complex), np.zeros((0, dim), dtype=complex), 0.0, 0.0, ball, dim, norm_tag)


# ---------------------------------------------------------------------------
# region search
# ---------------------------------------------------------------------------


def _unit_covector(op: Operator) -> np.ndarray:
    """Covector u with u(b) = 1 for every direction b of the operator."""
    B = np.array([b.coords for b in op.directions()], dtype=complex)
    return np.linalg.pinv(B) @ np.ones(len(B), dtype=complex)


def _certified_radius(op: Operator, phi0: Covector, region: Region, lo_req: float, hi_req: float,
                      cap_req: float = math.inf, cap: float = 1e3) -> float:
    def ok(delta):
        lo, hi = op.modulus_bounds(phi0, delta)
        return lo >= lo_req and hi <= cap_req if region is Region.V else hi <= hi_req

    if not ok(0.0):
        return 0.0
    good, bad = 0.0, 1.0
    while ok(bad):
        good, bad = bad, 2 * bad
        if bad > cap:
            return good
    for _ in range(40):
        mid = 0.5 * (good + bad)
        if ok(mid):
            good = mid
        else:
            bad = mid
    return good


def find_region_point(op: Operator, region: Region, budget: int = 8, margin: float = 0.2,
                      min_modulus: Optional[float] = None, norm_tag: NormTag = NormTag.L2,
                      angles: int = 64, max_modulus: Optional[float] = None) -> RegionBall:
    """Search ``phi0 = lam * u`` over expanding grids of ``lam`` for a certified ball.

    The ball certifies ``|g| <= 1 - margin`` (U) or ``|g| >= max(1 + margin,
    min_modulus)`` (V, and ``|g| <= max_modulus`` when given) on its whole
    extent.  Radii ``2^j * k/8`` with
    ``k = 8..15`` and ``angles`` arguments are scanned for ``j = 0..budget``
    after ``lam = 0``.  The first level offering a ball of radius at least
    ``||phi0|| / 2`` returns its smallest such ``phi0``; failing that, the
    smallest ``phi0`` whose ratio is within ``FALLBACK_RATIO`` of the best.
    """
    if region is Region.BOUNDARY:
        raise ValueError("region must be U or V")
    u = _unit_covector(op)
    lo_req = max(1 + margin, min_modulus or 0.0)
    hi_req = 1 - margin
    cap_req = math.inf if max_modulus is None else max_modulus
    seen = []  # (ratio, ||phi0||, phi0, delta) of every certified ball

    def consider(lams):
        phis = np.outer(lams, u)
        try:
            g, err = op.eigenvalues(phis, 1e-14)
        except ToleranceError:
            return None  # the level is out of floating-point range
        mod = np.abs(g)
        if region is Region.V:
            passing = np.flatnonzero((mod - err >= lo_req) & (mod + err <= cap_req))
        else:
            passing = np.flatnonzero(mod + err <= hi_req)
        chosen = None  # smallest ||phi0|| among balls with ratio >= 1/2
        for i in passing:
            phi0 = Covector(tuple(phis[i]), norm_tag)
            delta = _certified_radius(op, phi0, region, lo_req, hi_req, cap_req)
            if delta <= 0:
                continue
            n0 = phi0.dual_norm()
            ratio = math.inf if n0 == 0 else delta / n0
            key = (round(n0, 9), -delta)
            if ratio >= 0.5 and (chosen is None or key < chosen[0]):
                chosen = (key, phi0, delta)
            seen.append((ratio, n0, phi0, delta))
        return chosen

    def ball(phi0, delta):
        lo, hi = op.modulus_bounds(phi0, delta)
        return RegionBall(phi0, delta, region, margin, lo, hi)

    thetas = np.exp(2j * np.pi * np.arange(angles) / angles)
    thetas = np.where(np.abs(thetas.real) < 1e-12, 0, thetas.real) + 1j * np.where(np.abs(thetas.imag) < 1e-12, 0, thetas.imag)
    levels = [np.array([0j])]
    levels += [np.concatenate([(2.0**j) * (k / 8) * thetas for k in range(8, 16)]) for j in range(budget + 1)]
    # small radii only as a last resort
    levels += [np.concatenate([(2.0**j) * (k / 8) * thetas for k in range(8, 16)]) for j in (-1, -2)]
    for lams in levels:
        chosen = consider(lams)
        if chosen is not None:
            return ball(chosen[1], chosen[2])
    if not seen:
        raise RegionSearchError(f"no certified {region.value} ball found within budget {budget}")
    # near-best ratio at the smallest centre keeps exponents moderate
    top = max(r for r, *_ in seen)
    near = [c for c in seen if c[0] >= FALLBACK_RATIO * top]
    _, _, phi0, delta = min(near, key=lambda c: (round(c[1], 9), -c[3]))
    return ball(phi0, delta)


# ---------------------------------------------------------------------------
# monomial engines
# ---------------------------------------------------------------------------


def _rounding(weights: np.ndarray, exps_norm: np.ndarray, r: float, count: int = 1) -> float:
    return float((8 + math.log2(max(count, 2))) * UNIT_ROUNDOFF
                 * (np.abs(weights) * np.exp(exps_norm * r)).sum())


def _quotient(Y: float, k: int, t: Optional[float], eps: float) -> tuple[dict, float]:
    """Weights ``{s: w}`` of ``sum w e^{s phi}`` approximating ``phi^k/k!``; returns (weights, trunc)."""
    if t is None:
        t = min(0.5, eps * math.exp(-Y) / 2)
        while True:
            if t < T_FLOOR:
                raise ToleranceError(f"eps={eps:g} not reachable with t >= {T_FLOOR:g}")
            weights, trunc = _quotient(Y, k, t, eps)
            if trunc <= eps:
                return weights, trunc
            t /= 2
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    weights: dict = {t: t**-k, 0.0: -(t**-k)}
    trunc = t * math.exp(Y)
    for j in range(1, k):
        sub_eps = eps * t ** (k - j) / (k + 1)
        sub, sub_err = _quotient(Y, j, None, sub_eps)
        scale = -(t ** (j - k))
        for s, w in sub.items():
            weights[s] = weights.get(s, 0.0) + scale * w
        trunc += t ** (j - k) * sub_err
    return weights, trunc


def approx_power(phi: Covector, k: int, ball: BallSpec, eps: Optional[float] = None,
                 t: Optional[float] = None) -> ExpCombo:
    """Approximate ``phi^k / k!`` by exponentials ``e^{s phi}``, ``0 <= s <= t``.

    With ``t`` given the top-level quotient uses it (error ``t e^{||phi|| r}``
    plus the recursive lower-order budgets); otherwise ``t`` starts at
    ``min(0.5, eps e^{-||phi|| r}/2)`` and halves until the certificate
    meets ``eps``.
    """
    if k < 1:
        raise ValueError("k >= 1 required")
    Y = phi.dual_norm() * ball.radius
    strict = eps is not None
    if eps is None:
        if t is None:
            raise ValueError("give eps or t")
        eps = t * math.exp(Y) * (k + 1) / 2
    if eps <= 0:
        raise ValueError("eps must be positive")
    weights, trunc = _quotient(Y, k, t, eps)
    ss = np.array(sorted(weights))
    w = np.array([weights[s] for s in ss], dtype=complex)
    exps = np.outer(ss, np.asarray(phi.coords))
    rnd = _rounding(w, ss * phi.dual_norm(), ball.radius, len(w))
    if strict and trunc + rnd > eps:
        # the t^{-k} weights cancel catastrophically in floating point
        raise ToleranceError(f"certified error {trunc + rnd:.3g} exceeds eps={eps:g}")
    return ExpCombo(w, exps, trunc, rnd, ball, phi.dim, phi.norm_tag, {"t": t})


def _aliasing(Y: float, rho: float, k: int, m: int) -> float:
    """Bound of ``sum_{l >= 1} Y^{k+lm} rho^{lm} / (k+lm)!``."""
    if Y == 0:
        return 0.0
    total = 0.0
    l = 1
    prev = None
    while True:
        n = k + l * m
        term = math.exp(n * math.log(Y) + l * m * math.log(rho) - math.lgamma(n + 1))
        total += term
        if prev is not None and term <= 0.5 * prev and term < 1e-18 * max(total, 1e-300):
            return total + term  # geometric remainder
        if l > 64:
            return total + term
        prev = term
        l += 1


def contour_nodes(coeffs: Sequence[complex], rho: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``s_j`` and weights for ``sum_k coeffs[k] y^k/k!`` on a circle of radius rho."""
    s = rho * np.exp(2j * np.pi * np.arange(m) / m)
    w = np.zeros(m, dtype=complex)
    inv = 1.0 / s
    power = np.ones(m, dtype=complex)
    for c in coeffs:
        if c != 0:
            w += c * power
        power = power * inv
    return s, w / m


def _contour_plan(C: np.ndarray, Y: float, rho: float, eps: float, m_cap: int = 4096) -> tuple[int, float]:
    kmax = len(C) - 1
    nz = [(k, abs(c)) for k, c in enumerate(C) if c != 0]
    m = kmax + 1
    while True:
        err = sum(c * _aliasing(Y, rho, k, m) for k, c in nz)
        if err <= eps:
            return m, err
        m += max(1, m // 8)
        if m > m_cap:
            raise ToleranceError(f"contour quadrature needs more than {m_cap} nodes")


def approx_power_contour(psi: Covector, coeffs: Sequence[complex], rho: float, eps: float,
                         ball: BallSpec) -> ExpCombo:
    """Approximate ``sum_k coeffs[k] psi^k / k!`` by ``e^{s psi}`` with ``|s| = rho``."""
    C = np.asarray(coeffs, dtype=complex)
    Y = psi.dual_norm() * ball.radius
    m, err = _contour_plan(C, Y, rho, eps)
    s, w = contour_nodes(C, rho, m)
    exps = np.outer(s, np.asarray(psi.coords, dtype=complex))
    rnd = _rounding(w, np.full(m, rho * psi.dual_norm()), ball.radius, m)
    return ExpCombo(w, exps, err, rnd, ball, psi.dim, psi.norm_tag, {"nodes": m})


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _polarized(alpha: tuple) -> tuple:
    return tuple((float(w), psi, k) for w, psi, k in polarize(alpha))


def _alphas_upto(dim: int, M: int) -> list[tuple]:
    out = [(0,) * dim]
    frontier = [(0,) * dim]
    for _ in range(M):
        nxt = set()
        for a in frontier:
            for j in range(dim):
                b = list(a)
                b[j] += 1
                nxt.add(tuple(b))
        frontier = sorted(nxt, key=lambda a: (sum(a), a))
        out.extend(frontier)
    return out


def _taylor_moments(theta: np.ndarray, weights: np.ndarray, M: int) -> tuple[dict, dict]:
    """``sum_i w_i theta_i^alpha / alpha!`` and its absolute majorant for ``|alpha| <= M``."""
    dim = theta.shape[1]
    cols = {(0,) * dim: np.ones(theta.shape[0], dtype=complex)}
    for a in _alphas_upto(dim, M)[1:]:
        j = next(i for i, v in enumerate(a) if v)
        prev = list(a)
        prev[j] -= 1
        cols[a] = cols[tuple(prev)] * theta[:, j] / a[j]
    mom = {a: complex(weights @ v) for a, v in cols.items()}
    aw = np.abs(weights)
    absm = {a: float(aw @ np.abs(v)) for a, v in cols.items()}
    return mom, absm


def _integer_groups(Q: dict, Qabs: dict) -> list:
    groups: dict = {}
    for a, q in Q.items():
        fk = math.factorial(sum(a))
        for wpol, psi, k in _polarized(a):
            C, Cabs = groups.setdefault(psi, ([], []))
            while len(C) <= k:
                C.append(0j)
                Cabs.append(0.0)
            C[k] += q * wpol * fk
            Cabs[k] += Qabs[a] * abs(wpol) * fk
    return [(tuple(float(x) for x in psi), v) for psi, v in sorted(groups.items())]


def _cyclic_groups(Q: dict, Qabs: dict, dim: int) -> list:
    """Power series along ``psi_j = (1, w^j2, ...)`` reproducing Q exactly.

    With ``L = deg Q + 1`` and ``beta = alpha[1:]``,
    ``x^alpha = alpha! L^{1-N} sum_j w^{-j.beta} psi_j^k / k!`` for
    ``|alpha| = k``; the sum over j is a discrete Fourier transform.
    """
    if not Q:
        return []
    K = max(sum(a) for a in Q)
    L = K + 1
    shape = (L,) * (dim - 1)
    A = np.zeros((K + 1,) + shape, dtype=complex)
    Aabs = np.zeros(K + 1)
    for a, q in Q.items():
        k = sum(a)
        fa = math.prod(math.factorial(v) for v in a)
        A[(k,) + tuple(a[1:])] += q * fa
        Aabs[k] += Qabs[a] * fa
    scale = float(L) ** (1 - dim)
    if dim > 1:
        C = np.fft.fftn(A, axes=tuple(range(1, dim))) * scale
    else:
        C = A
    Cabs = list(Aabs * scale)
    w = np.exp(2j * np.pi * np.arange(L) / L)
    out = []
    for j in np.ndindex(*shape):
        psi = (1.0,) + tuple(complex(w[i]) for i in j)
        out.append((psi, (list(C[(slice(None),) + j]), Cabs)))
    return out


def approx_in_region(f: ExpPoly, op: Operator, region: Region, eps: float, ball: BallSpec,
                     budget: int = 8, margin: float = 0.2, region_ball: Optional[RegionBall] = None,
                     shares: Sequence[float] = DEFAULT_SHARES, shrink: float = 0.9,
                     min_modulus: Optional[float] = None, polarization: str = "cyclic",
                     strict: bool = True) -> ExpCombo:
    """Approximate ``f`` on ``ball`` within ``eps`` by exponentials from a region ball.

    Steps: keep terms already inside the ball exactly; write the rest as
    ``e^{phi0} h``; replace each ``e^{theta}`` factor of ``h`` by its Taylor
    polynomial; polarize every monomial into powers ``psi^k``; realize each
    direction's power series by contour quadrature with nodes inside the
    ball; multiply ``e^{phi0}`` back in.  The error budget is split over
    Taylor tail, quadrature aliasing, floating rounding and dropped
    negligible terms by ``shares``.

    ``polarization="integer"`` uses the signed +-1 identity of
    :func:`polarize`, whose directions grow with the degree;
    ``"cyclic"`` uses the directions ``(1, w^j2, ..., w^jN)`` with w a root
    of unity of order ``deg Q + 1``, which all have the same small norm.

    The rounding share is a worst-case estimate.  With ``strict=False`` an
    overrun is reported in ``rounding_error`` instead of raising, for
    callers that verify by sampling.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0 < shrink < 1:
        raise ValueError("shrink must lie in (0, 1)")
    dim, r = f.dim, ball.radius
    if f.is_zero():
        return ExpCombo.empty(dim, ball, f.norm_tag)
    rb = region_ball or find_region_point(op, region, budget, margin, min_modulus, f.norm_tag)
    phi0 = np.asarray(rb.center.coords, dtype=complex)
    dual = f.norm_tag.dual

    passed_w, passed_e, rest = [], [], []
    for k, p in f._terms.items():
        if p.is_constant() and rb.contains(k):
            passed_w.append(p.constant_term())
            passed_e.append(k)
        else:
            rest.append((k, p))
    # drop the smallest remaining terms while their total bound fits the spare share
    sizes = [p.sup_upper(r) * math.exp(vector_norm(k, dual) * r) for k, p in rest]
    pruned, dropped = 0.0, 0
    keep = []
    for i in sorted(range(len(rest)), key=lambda i: sizes[i]):
        if pruned + sizes[i] <= eps * shares[3]:
            pruned += sizes[i]
            dropped += 1
        else:
            keep.append(i)
    rest = [rest[i] for i in sorted(keep)]
    info = {"region_center": tuple(phi0), "region_radius": rb.radius, "bypassed": len(passed_w),
            "pruned": dropped}
    if not rest:
        return ExpCombo(np.array(passed_w, dtype=complex), np.array(passed_e, dtype=complex).reshape(-1, dim),
                        pruned, 0.0, ball, dim, f.norm_tag, info)

    E0 = math.exp(vector_norm(phi0, dual) * r)
    tail_budget = eps * shares[0] / E0
    quad_budget = eps * shares[1] / E0
    round_budget = eps * shares[2]

    thetas = np.array([k for k, _ in rest], dtype=complex).reshape(len(rest), dim) - phi0
    tnorm = np.array([vector_norm(t, dual) for t in thetas]) * r
    sizes = np.array([p.sup_upper(r) for _, p in rest])
    M = 0
    while sum(s * exp_tail(y, M) for s, y in zip(sizes, tnorm)) > tail_budget:
        M += 1
        if M > 400:
            raise ToleranceError("Taylor truncation order exceeds 400")
    tail_err = sum(s * exp_tail(y, M) for s, y in zip(sizes, tnorm))

    # Taylor polynomial Q of h = sum p_i exp(theta_i)
    pure_idx = [i for i, (_, p) in enumerate(rest) if p.is_constant()]
    Q: dict = {}
    Qabs: dict = {}
    if pure_idx:
        w = np.array([rest[i][1].constant_term() for i in pure_idx])
        mom, absm = _taylor_moments(thetas[pure_idx], w, M)
        for a in mom:
            Q[a] = Q.get(a, 0j) + mom[a]
            Qabs[a] = Qabs.get(a, 0.0) + absm[a]
    for i, (_, p) in enumerate(rest):
        if p.is_constant():
            continue
        mom, absm = _taylor_moments(thetas[i:i + 1], np.ones(1), M)
        for a, c in p.terms.items():
            for b in mom:
                ab = tuple(x + y for x, y in zip(a, b))
                Q[ab] = Q.get(ab, 0j) + c * mom[b]
                Qabs[ab] = Qabs.get(ab, 0.0) + abs(c) * absm[b]
    count = len(rest)

    zero = (0,) * dim
    const = Q.pop(zero, 0j)
    Qabs.pop(zero, None)
    if polarization == "integer":
        groups = _integer_groups(Q, Qabs)
    elif polarization == "cyclic":
        groups = _cyclic_groups(Q, Qabs, dim)
    else:
        raise ValueError(f"unknown polarization {polarization!r}")

    weights = [np.array(passed_w, dtype=complex), np.array([const * 1.0])]
    exps = [np.array(passed_e, dtype=complex).reshape(-1, dim), phi0.reshape(1, dim)]
    quad_err = 0.0
    rnd = 0.0
    gamma = (8 + math.log2(max(count, 2))) * UNIT_ROUNDOFF
    per_dir = quad_budget / max(1, len(groups))
    nodes_total = 0
    for psi, (C, Cabs) in groups:
        psi_c = Covector(psi, f.norm_tag)
        pn = psi_c.dual_norm()
        rho = shrink * rb.radius / pn
        combo = approx_power_contour(psi_c, C, rho, per_dir, ball)
        quad_err += combo.truncation_error
        rnd += combo.rounding_error
        # coefficient rounding pushed through the quadrature weights
        rnd += gamma * sum(c * rho**-k for k, c in enumerate(Cabs)) * math.exp(rho * pn * r)
        weights.append(combo.weights)
        exps.append(combo.exponents + phi0)
        nodes_total += len(combo)
    rnd = rnd * E0 + gamma * abs(const) * E0
    total_w = np.concatenate(weights)
    total_e = np.concatenate(exps)
    trunc = E0 * (tail_err + quad_err) + pruned
    if strict and rnd > round_budget:
        raise ToleranceError(f"rounding estimate {rnd:.3g} exceeds its budget {round_budget:.3g}")
    info.update({"taylor_order": M, "directions": len(groups), "nodes": nodes_total})
    return ExpCombo(total_w, total_e, trunc, rnd, ball, dim, f.norm_tag, info)
