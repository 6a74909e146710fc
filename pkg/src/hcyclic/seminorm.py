"""Ball seminorms ``||f||_r = sup_{||x|| <= r} |f(x)|``.

Lower estimates sample the boundary sphere (an entire function attains its
maximum modulus on the boundary); upper bounds come from the triangle
inequality on the canonical terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import ExpPoly, NormTag, vector_norm


@dataclass(frozen=True)
class BallSpec:
    radius: float = 1.0
    norm_tag: NormTag = NormTag.L2

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def inflated(self, extra: float) -> "BallSpec":
        return BallSpec(self.radius + extra, self.norm_tag)


@dataclass(frozen=True)
class SamplerConfig:
    sample_count: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")

    def denser(self, factor: int) -> "SamplerConfig":
        return SamplerConfig(self.sample_count * factor, self.seed)


def make_rng(seed: int) -> np.random.Generator:
    # counter-based, so streams are reproducible across platforms
    return np.random.Generator(np.random.Philox(key=seed & (2**64 - 1)))


def sphere_samples(dim: int, ball: BallSpec, cfg: SamplerConfig) -> np.ndarray:
    """Seeded points with ``norm(x) == ball.radius``, shape ``(count, dim)``.

    Samples for a larger ``sample_count`` extend those for a smaller one.
    For LINF the points lie on the torus ``|x_j| = r``, which carries the
    maximum modulus of a function on the polydisc.
    """
    raw = make_rng(cfg.seed).standard_normal((cfg.sample_count, dim, 2))
    z = raw[..., 0] + 1j * raw[..., 1]
    r = ball.radius
    if ball.norm_tag is NormTag.L2:
        return r * z / np.linalg.norm(z, axis=1, keepdims=True)
    if ball.norm_tag is NormTag.L1:
        return r * z / np.abs(z).sum(axis=1, keepdims=True)
    return r * z / np.abs(z)


def sup_lower(f: ExpPoly, ball: BallSpec, cfg: SamplerConfig) -> float:
    if f.is_zero():
        return 0.0
    vals = f.eval_many(sphere_samples(f.dim, ball, cfg))
    return float(np.abs(vals).max())


def sup_upper(f: ExpPoly, ball: BallSpec) -> float:
    """Certified ``sum_i [sum_alpha |c| r^|alpha|] exp(||phi_i||_* r)``."""
    r = ball.radius
    total = 0.0
    dual = ball.norm_tag.dual
    for p, phi in f.terms:
        total += p.sup_upper(r) * math.exp(vector_norm(phi.coords, dual) * r)
    return total


class DistanceBounds(NamedTuple):
    sampled_lower: float
    certified_upper: float


def distance(f: ExpPoly, g: ExpPoly, ball: BallSpec, cfg: SamplerConfig) -> float:
    return sup_lower(f - g, ball, cfg)


def distance_bounds(f: ExpPoly, g: ExpPoly, ball: BallSpec, cfg: SamplerConfig) -> DistanceBounds:
    d = f - g
    return DistanceBounds(sup_lower(d, ball, cfg), sup_upper(d, ball))
