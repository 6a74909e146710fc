"""Shared seeded fuzz corpus and hypothesis strategies."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from hcyclic.core import Covector, ExpPoly, NormTag, Point, Polynomial
from hcyclic.seminorm import make_rng

settings.register_profile("repo", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def random_complex(rng, scale=1.0):
    return complex(rng.uniform(-scale, scale), rng.uniform(-scale, scale))


def random_polynomial(rng, dim, max_deg=4, max_terms=4):
    terms = {}
    for _ in range(int(rng.integers(1, max_terms + 1))):
        deg = int(rng.integers(0, max_deg + 1))
        alpha = [0] * dim
        for _ in range(deg):
            alpha[int(rng.integers(dim))] += 1
        terms[tuple(alpha)] = random_complex(rng)
    return Polynomial(dim, terms)


def random_covector(rng, dim, max_norm=2.0, norm_tag=NormTag.L2):
    v = np.array([random_complex(rng) for _ in range(dim)])
    v *= rng.uniform(0, max_norm) / max(np.linalg.norm(v), 1e-12)
    return Covector(tuple(v), norm_tag)


def random_exppoly(rng, dim, max_terms=3, max_deg=4, max_phi=2.0, norm_tag=NormTag.L2):
    k = int(rng.integers(1, max_terms + 1))
    terms = [(random_polynomial(rng, dim, max_deg), random_covector(rng, dim, max_phi, norm_tag))
             for _ in range(k)]
    return ExpPoly(dim, terms, norm_tag)


def random_point(rng, dim, max_norm=1.0, norm_tag=NormTag.L2):
    v = np.array([random_complex(rng) for _ in range(dim)])
    v *= rng.uniform(0.1, max_norm) / np.linalg.norm(v)
    return Point(tuple(v), norm_tag)


def fuzz_corpus(count=50, seed=2024):
    """(f, a) pairs with N in {1,2,3}, <= 3 terms, degree <= 4, ||phi|| <= 2, ||a|| <= 1."""
    rng = make_rng(seed)
    out = []
    for _ in range(count):
        dim = int(rng.integers(1, 4))
        out.append((random_exppoly(rng, dim), random_point(rng, dim)))
    return out


@pytest.fixture(scope="session")
def corpus():
    return fuzz_corpus()


# hypothesis ---------------------------------------------------------------

small = st.floats(-1.5, 1.5, allow_nan=False, allow_infinity=False)
complexes = st.builds(complex, small, small)


@st.composite
def exppolys(draw, dim=None, max_terms=3, max_deg=3):
    dim = dim or draw(st.integers(1, 3))
    terms = []
    for _ in range(draw(st.integers(1, max_terms))):
        coeffs = {}
        for _ in range(draw(st.integers(1, 3))):
            alpha = tuple(draw(st.lists(st.integers(0, max_deg), min_size=dim, max_size=dim)))
            if sum(alpha) <= max_deg:
                coeffs[alpha] = draw(complexes)
        phi = tuple(draw(st.lists(complexes, min_size=dim, max_size=dim)))
        terms.append((Polynomial(dim, coeffs), phi))
    return ExpPoly(dim, terms)


@st.composite
def points(draw, dim):
    return Point(tuple(draw(st.lists(complexes, min_size=dim, max_size=dim))))
