"""Transitivity witnesses and multi-target orbit tours.

A witness realizes one step of the hypercyclicity criterion:
``z = x0 + S^n y0`` with ``x0`` built from exponents where ``|g| < 1`` and
``y0`` from exponents where ``|g| > 1``, so that ``z`` is near the source
and ``T^n z = T^n x0 + y0`` is near the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Covector, ExpPoly, Polynomial, dumps, vector_norm
from .density import ExpCombo, RegionBall, approx_in_region, find_region_point
from .operators import Operator, Region, RegionError
from .seminorm import BallSpec, SamplerConfig, sup_lower
from .symbols import ToleranceError

UNIT_ROUNDOFF = 2.0**-53
CSV_COLUMNS = ("step", "n", "sampled_src", "sampled_tgt", "certified_src", "certified_tgt", "terms_in_h")


# ---------------------------------------------------------------------------
# eigen-span helpers
# ---------------------------------------------------------------------------


def _pure_arrays(op: Operator, f: ExpPoly) -> tuple[np.ndarray, np.ndarray]:
    items = list(f._terms.items())
    if any(not p.is_constant() for _, p in items):
        raise RegionError("expected a span of pure exponentials")
    phis = np.array([k for k, _ in items], dtype=complex).reshape(len(items), op.dim)
    w = np.array([p.constant_term() for _, p in items], dtype=complex)
    return phis, w


def eigen_power(op: Operator, f: ExpPoly, n: int) -> ExpPoly:
    """``T^n f`` for ``n >= 0`` and ``S^{-n} f`` for ``n < 0`` on a pure-exponential span."""
    if f.is_zero() or n == 0:
        return f
    phis, w = _pure_arrays(op, f)
    g, _ = op.eigenvalues(phis, 1e-15)
    if n < 0 and np.any(g == 0):
        raise RegionError("eigenvalue 0: no inverse on this exponent")
    with np.errstate(over="ignore", invalid="ignore"):
        c = w * g.astype(complex) ** n
    if not np.all(np.isfinite(c)):
        raise ToleranceError(f"eigen-power overflow at n={n}")
    return ExpPoly(op.dim, [(Polynomial.constant(op.dim, complex(ci)), tuple(k)) for ci, k in zip(c, phis)],
                   f.norm_tag)


def power_bound(op: Operator, f: ExpPoly | ExpCombo, n: int, ball: BallSpec) -> float:
    """Certified ``sum |w| |g|^n e^{||psi|| r}`` (``n < 0`` uses ``|g| - err``)."""
    if isinstance(f, ExpCombo):
        phis, w = f.exponents, f.weights
    else:
        if f.is_zero():
            return 0.0
        phis, w = _pure_arrays(op, f)
    if len(w) == 0:
        return 0.0
    g, err = op.eigenvalues(phis, 1e-15)
    mod = np.abs(g) + err if n >= 0 else np.abs(g) - err
    if n < 0 and np.any(mod <= 0):
        return math.inf
    dual = ball.norm_tag.dual
    norms = np.array([vector_norm(row, dual) for row in phis])
    with np.errstate(divide="ignore", over="ignore"):
        logs = np.log(np.abs(w)) + n * np.log(mod) + norms * ball.radius
        total = float(np.exp(logs).sum())
    return total


def _rounding(op: Operator, f: ExpPoly | ExpCombo, n: int, ball: BallSpec) -> float:
    return (8 + 2 * abs(n)) * UNIT_ROUNDOFF * power_bound(op, f, n, ball)


# ---------------------------------------------------------------------------
# witness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    z: ExpPoly
    n: int
    src_error: float
    tgt_error: float
    certified_src: float
    certified_tgt: float
    x0: ExpPoly = field(default=None, compare=False)
    y0: ExpPoly = field(default=None, compare=False)

    def row(self, step: int = 1) -> dict:
        return {"step": step, "n": self.n, "sampled_src": self.src_error, "sampled_tgt": self.tgt_error,
                "certified_src": self.certified_src, "certified_tgt": self.certified_tgt,
                "terms_in_h": len(self.z)}

    def dumps(self) -> str:
        return f"n {self.n}\n" + dumps(self.z)


def smallest_decay_time(op: Operator, x0: ExpCombo, y0: ExpCombo, bound: float, ball: BallSpec,
                        n_min: int = 1, n_max: int = 10_000) -> int:
    """Smallest ``n >= n_min`` with ``||T^n x0|| <= bound`` and ``||S^n y0|| <= bound`` (certified)."""

    def ok(n):
        return power_bound(op, x0, n, ball) <= bound and power_bound(op, y0, -n, ball) <= bound

    if ok(n_min):
        return n_min
    lo, hi = n_min, n_min + 1
    while not ok(hi):
        lo, hi = hi, n_min + 2 * (hi - n_min)
        if hi > n_max:
            if ok(n_max):
                hi = n_max
                break
            raise ToleranceError(f"no n <= {n_max} meets the decay bound {bound:g}")
    # both bounds are monotone in n, so bisection finds the first good n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def transitivity_witness(op: Operator, f_src: ExpPoly, f_tgt: ExpPoly, eps: float,
                         ball: BallSpec = BallSpec(), budget: int = 8, margin: float = 0.2,
                         cfg: SamplerConfig = SamplerConfig(), n_min: int = 1, n_max: int = 10_000,
                         retries: int = 4) -> Witness:
    """Find ``z`` near ``f_src`` and ``n`` with ``T^n z`` near ``f_tgt`` on ``ball``.

    Sub-tolerances start at ``eps/3`` and halve whenever sampling exceeds
    ``eps``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rb_u = find_region_point(op, Region.U, budget, margin, norm_tag=f_src.norm_tag)
    rb_v = find_region_point(op, Region.V, budget, margin, norm_tag=f_tgt.norm_tag)
    sub = eps / 3
    for _ in range(retries + 1):
        x0 = approx_in_region(f_src, op, Region.U, sub, ball, region_ball=rb_u)
        y0 = approx_in_region(f_tgt, op, Region.V, sub, ball, region_ball=rb_v)
        n = smallest_decay_time(op, x0, y0, sub, ball, n_min, n_max)
        x0p, y0p = x0.to_exppoly(), y0.to_exppoly()
        z = x0p + op.iterate_inverse(y0p, n, margin)
        tnz = eigen_power(op, z, n)
        src_err = sup_lower(z - f_src, ball, cfg)
        tgt_err = sup_lower(tnz - f_tgt, ball, cfg)
        cert_src = x0.certified_error + power_bound(op, y0, -n, ball) + _rounding(op, y0, -n, ball)
        cert_tgt = (y0.certified_error + power_bound(op, x0, n, ball)
                    + _rounding(op, x0, n, ball) + _rounding(op, y0, 0, ball))
        if src_err <= eps and tgt_err <= eps:
            return Witness(z, n, src_err, tgt_err, cert_src, cert_tgt, x0p, y0p)
        sub /= 2
    raise ToleranceError(f"witness sampling stayed above eps={eps:g} after {retries} retries")


# ---------------------------------------------------------------------------
# tours
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Tour:
    h: ExpPoly
    times: tuple
    errors: tuple
    rows: tuple = field(default=(), compare=False)

    def dumps(self) -> str:
        return "times " + " ".join(str(n) for n in self.times) + "\n" + dumps(self.h)


def _visit_errors(op, h, targets, times, ball, cfg) -> list[float]:
    return [sup_lower(eigen_power(op, h, n) - f, ball, cfg) for f, n in zip(targets, times)]


def orbit_tour(op: Operator, targets: Sequence[ExpPoly], eps: float, ball: BallSpec = BallSpec(),
               budget: int = 8, margin: float = 0.2, cfg: SamplerConfig = SamplerConfig(),
               retries: int = 3, band_width: float = 1.15, level_gap: float = math.e,
               gap_cap: int = 2000, accept: float = 0.5) -> Tour:
    """Find ``h`` and ``n_1 < ... < n_J`` with ``T^{n_j} h`` near ``targets[j]``.

    One target is a plain witness from 0.  Otherwise the first target is
    approximated from U (later visits see it decay), and each further one
    by ``y_j`` from a V ball whose ``|g|`` exceeds every earlier V ball,
    with exact source ``f_j - T^{n_j} h``:

        h <- h + S^{n_j} y_j,   y_j ~ f_j - T^{n_j} h.

    Middle balls are kept in a narrow modulus band so that their growth at
    later visits stays small.  Each gap ``n_j - n_{j-1}`` grows until every
    visit so far samples below ``accept * eps``; a step that runs past
    ``gap_cap`` is retried with half its tolerance.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("targets must be nonempty")
    if eps <= 0:
        raise ValueError("eps must be positive")
    J = len(targets)
    if J == 1:
        w = transitivity_witness(op, ExpPoly.zero(targets[0].dim, targets[0].norm_tag), targets[0], eps,
                                 ball, budget, margin, cfg)
        return Tour(w.z, (w.n,), (w.tgt_error,), (w.row(1),))

    tag = targets[0].norm_tag
    rows = []
    rb_u = find_region_point(op, Region.U, budget, margin, norm_tag=tag)
    eps1 = eps / 2**J
    y1 = approx_in_region(targets[0], op, Region.U, eps1, ball, region_ball=rb_u)
    try:
        h = eigen_power(op, y1.to_exppoly(), -1)
        times = [1]
    except RegionError:
        # some exponent has g = 0 (a constant under MacLane); visit at n = 0
        h = y1.to_exppoly()
        times = [0]
    err = _visit_errors(op, h, targets[:1], times, ball, cfg)
    rows.append({"step": 1, "n": times[0], "sampled_src": 0.0, "sampled_tgt": err[0], "certified_src": 0.0,
                 "certified_tgt": y1.certified_error, "terms_in_h": len(h)})
    hi_prev: Optional[float] = None
    for j in range(1, J):
        last = j == J - 1
        lo_req = 1 + margin if hi_prev is None else max(1 + margin, level_gap * hi_prev)
        rb = find_region_point(op, Region.V, budget, margin, min_modulus=lo_req, norm_tag=tag,
                               max_modulus=None if last else lo_req * band_width)
        eps_j = eps / 2 ** (J - j)
        for _ in range(retries + 1):
            found = _tour_step(op, h, targets, times, targets[j], rb, eps_j, eps * accept, ball, cfg,
                               gap_cap)
            if found is not None:
                break
            eps_j /= 2
        else:
            raise ToleranceError(f"tour step {j + 1} found no admissible gap")
        h, n, y, errs = found
        # certified part of the earlier-visit perturbation
        pert = sum(power_bound(op, y, -(n - ni), ball) for ni in times)
        times.append(n)
        rows.append({"step": j + 1, "n": n, "sampled_src": max(errs[:-1]), "sampled_tgt": errs[-1],
                     "certified_src": pert, "certified_tgt": y.certified_error, "terms_in_h": len(h)})
        hi_prev = rb.modulus_hi
    final = _visit_errors(op, h, targets, times, ball, cfg)
    return Tour(h, tuple(times), tuple(final), tuple(rows))


def _tour_step(op, h, targets, times, f, rb: RegionBall, eps_j, accept_tol, ball, cfg, gap_cap):
    gap = 1
    while gap <= gap_cap:
        n = times[-1] + gap
        try:
            F = f - eigen_power(op, h, n)
            y = approx_in_region(F, op, Region.V, eps_j, ball, region_ball=rb, strict=False)
            hh = h + eigen_power(op, y.to_exppoly(), -n)
            errs = _visit_errors(op, hh, targets[:len(times) + 1], times + [n], ball, cfg)
        except ToleranceError:
            errs = None
        if errs is not None and max(errs) <= accept_tol:
            return hh, n, y, errs
        gap = gap + 1 if gap < 8 else int(gap * 1.25)
    return None


# ---------------------------------------------------------------------------
# criterion diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriterionReport:
    phi: tuple
    psi: tuple
    g_phi: complex
    g_psi: complex
    decay_T: tuple  # (n, sampled, certified)
    decay_S: tuple
    identity_defect: float

    def ratios(self, which: str = "T") -> list[float]:
        seq = self.decay_T if which == "T" else self.decay_S
        return [b[1] / a[1] for a, b in zip(seq, seq[1:]) if a[1] > 0]


def criterion_report(op: Operator, ball: BallSpec = BallSpec(), cfg: SamplerConfig = SamplerConfig(),
                     n_max: int = 50, margin: float = 0.2, budget: int = 8,
                     phi: Optional[Covector] = None, psi: Optional[Covector] = None) -> CriterionReport:
    """Decay of ``T^n e^phi`` (phi in U) and ``S^n e^psi`` (psi in V), plus ``max |T S - id|``."""
    if phi is None:
        phi = find_region_point(op, Region.U, budget, margin).center
    if psi is None:
        rb = find_region_point(op, Region.V, budget, margin)
        psi = rb.center
    else:
        rb = None
    ex = ExpPoly.exponential(phi)
    ey = ExpPoly.exponential(psi)
    decay_T, decay_S = [], []
    for n in range(1, n_max + 1):
        t = eigen_power(op, ex, n)
        s = op.iterate_inverse(ey, n, margin)
        decay_T.append((n, sup_lower(t, ball, cfg), power_bound(op, ex, n, ball)))
        decay_S.append((n, sup_lower(s, ball, cfg), power_bound(op, ey, -n, ball)))
    # T S = id on a few exponents of the V ball
    probes = [psi]
    if rb is not None:
        for u in (1, -1, 1j, -1j):
            probes.append(psi + Covector.basis(0, op.dim).scale(0.5 * rb.radius * u))
    defect = 0.0
    for p in probes:
        e = ExpPoly.exponential(p)
        back = op.apply(op.apply_inverse(e, margin)) - e
        defect = max(defect, back.max_abs_coefficient() if not back.is_zero() else 0.0)
    g_phi = op.eigenvalue(phi)[0]
    g_psi = op.eigenvalue(psi)[0]
    return CriterionReport(tuple(phi.coords), tuple(psi.coords), g_phi, g_psi,
                           tuple(decay_T), tuple(decay_S), defect)


def format_number(x: float) -> str:
    """Stable text for CSV and summaries."""
    return format(float(x), ".10g")


def csv_text(rows: Sequence[dict]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        cells = []
        for c in CSV_COLUMNS:
            v = r[c]
            cells.append(str(v) if isinstance(v, int) else format_number(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
