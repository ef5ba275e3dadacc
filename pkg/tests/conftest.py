"""
Shared fixtures: seeded generators for random polynomials and QUBOs.
"""

import random
from typing import Callable, List

import pytest

from annealfactor.core.boolpoly import MultilinearPoly, VarId, monomial, xbit, ybit
from annealfactor.core.quadratize import Qubo, pair


def _variables(count: int) -> List[VarId]:
    half = (count + 1) // 2
    return [xbit(i) for i in range(1, half + 1)] + [ybit(i) for i in range(1, count - half + 1)]


@pytest.fixture
def random_poly() -> Callable[..., MultilinearPoly]:
    """Factory for random multilinear polynomials over x and y bits."""

    def make(
        rng: random.Random,
        num_vars: int = 6,
        max_degree: int = 4,
        max_terms: int = 8,
        max_coeff: int = 100,
    ) -> MultilinearPoly:
        variables = _variables(num_vars)
        terms = {}
        for _ in range(rng.randint(1, max_terms)):
            degree = rng.randint(0, max_degree)
            mono = monomial(*rng.sample(variables, degree))
            terms[mono] = rng.choice([-1, 1]) * rng.randint(1, max_coeff)
        return MultilinearPoly(terms)

    return make


@pytest.fixture
def random_qubo() -> Callable[..., Qubo]:
    """Factory for random integer QUBOs with every variable declared."""

    def make(rng: random.Random, num_vars: int = 10, max_coeff: int = 20) -> Qubo:
        variables = _variables(num_vars)
        linear = {v: rng.randint(-max_coeff, max_coeff) for v in variables}
        quadratic = {}
        for i, a in enumerate(variables):
            for b in variables[i + 1:]:
                if rng.random() < 0.5:
                    quadratic[pair(a, b)] = rng.randint(-max_coeff, max_coeff)
        return Qubo(
            {v: c for v, c in linear.items() if c},
            {k: c for k, c in quadratic.items() if c},
            rng.randint(-5, 5),
            (),
            frozenset(variables),
        )

    return make
