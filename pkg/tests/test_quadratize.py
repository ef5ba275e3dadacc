"""
Tests for quadratization and the QUBO container.
"""

import random

import numpy as np
import pytest

from annealfactor.core.boolpoly import (
    MissingVariableError,
    MultilinearPoly,
    TextFormatError,
    VarKind,
    all_assignments,
    ancilla,
    xbit,
    ybit,
)
from annealfactor.core.objective import ProblemSpec, build_objective
from annealfactor.core.quadratize import (
    PenaltyWeight,
    Qubo,
    pair,
    quadratize,
    qubo_energy,
    qubo_from_poly,
    safe_penalty_bound,
)
from annealfactor.core.solve import energy_table


x1, x2, x3 = xbit(1), xbit(2), xbit(3)
y1, y2 = ybit(1), ybit(2)


def min_over_ancillas(q: Qubo, originals):
    """Minimum QUBO energy over ancillas for every assignment of ``originals``."""
    variables, energies = energy_table(q)
    k = len(originals)
    assert list(variables[:k]) == list(originals)
    return energies.reshape(-1, 2 ** k).min(axis=0)


class TestQubo:
    """Test the QUBO container."""

    def test_energy(self):
        """Test energy evaluation with offset."""
        q = Qubo({x1: 3, y1: -2}, {pair(x1, y1): 5}, offset=1)
        assert q.energy({x1: 0, y1: 0}) == 1
        assert q.energy({x1: 1, y1: 1}) == 7
        assert qubo_energy(q, {x1: 0, y1: 1}) == -1

    def test_energy_missing_variable(self):
        """Test that a missing endpoint raises even when the other is 0."""
        q = Qubo({}, {pair(x1, y1): 5})
        with pytest.raises(MissingVariableError) as excinfo:
            qubo_energy(q, {x1: 0})
        assert excinfo.value.var == y1
        with pytest.raises(MissingVariableError):
            qubo_energy(q, {y1: 0})
        with pytest.raises(MissingVariableError):
            qubo_energy(Qubo({x2: 1}), {x1: 0})

    def test_unordered_key_rejected(self):
        """Test that quadratic keys must be ordered pairs."""
        with pytest.raises(ValueError, match="ordered pair"):
            Qubo({}, {(y1, x1): 1})

    def test_pair(self):
        """Test pair ordering and the distinctness requirement."""
        assert pair(y1, x1) == (x1, y1)
        with pytest.raises(ValueError, match="distinct"):
            pair(x1, x1)

    def test_declared_variables(self):
        """Test that declared variables count even without coefficients."""
        q = Qubo({x1: 1}, {}, 0, (), frozenset({x1, y2}))
        assert q.variables == (x1, y2)
        assert q.num_variables == 2

    def test_text_round_trip(self):
        """Test text dump and load, ancilla definitions included."""
        p = MultilinearPoly({(x1, x2, y1): 4, (x1,): -3, (): 2})
        q = quadratize(p, safe_penalty_bound(p))
        text = q.to_text()
        assert text.startswith("c 2\n")
        assert "# def a0 x1 x2" in text
        loaded = Qubo.from_text(text)
        assert loaded == q

    def test_text_rejects_garbage(self):
        """Test that malformed lines raise TextFormatError."""
        with pytest.raises(TextFormatError, match="Line 2"):
            Qubo.from_text("c 0\nx1 y1 y2 3\n")
        with pytest.raises(TextFormatError):
            Qubo.from_text("x1 abc\n")

    def test_from_poly_rejects_cubic(self):
        """Test that cubic polynomials must be quadratized first."""
        with pytest.raises(ValueError, match="quadratize"):
            qubo_from_poly(MultilinearPoly({(x1, x2, x3): 1}))

    def test_from_poly(self):
        """Test wrapping a quadratic polynomial."""
        p = MultilinearPoly({(x1, y1): -2, (x2,): 5, (): 7})
        q = qubo_from_poly(p)
        assert q.quadratic == {(x1, y1): -2}
        assert q.linear == {x2: 5}
        assert q.offset == 7
        assert q.num_ancillas == 0


class TestPenalty:
    """Test the penalty weight and its certified bound."""

    def test_positive_weight(self):
        """Test that S must be a positive integer."""
        assert PenaltyWeight(3).s == 3
        with pytest.raises(ValueError):
            PenaltyWeight(0)
        with pytest.raises(ValueError):
            PenaltyWeight(2.5)  # type: ignore[arg-type]

    def test_safe_bound(self):
        """Test 1 + sum of |c| over degree >= 3 terms."""
        p = MultilinearPoly({(x1, x2, x3): 5, (x1, x2, y1, y2): -3, (x1,): 70, (x1, y1): -9})
        assert safe_penalty_bound(p) == 9

    def test_safe_bound_quadratic(self):
        """Test the bound for polynomials that need no ancillas."""
        assert safe_penalty_bound(MultilinearPoly({(x1, y1): 100})) == 1


class TestQuadratize:
    """Test the reduction itself."""

    def test_quadratic_input_unchanged(self):
        """Test that degree <= 2 input adds no ancillas."""
        p = MultilinearPoly({(x1, y1): -2, (x2,): 5, (): 7})
        q = quadratize(p, 10)
        assert q.num_ancillas == 0
        assert q == qubo_from_poly(p)

    def test_single_cubic(self):
        """Test the Rosenberg penalty on one cubic term."""
        p = MultilinearPoly({(x1, x2, y1): 1})
        q = quadratize(p, PenaltyWeight(2))
        assert q.ancilla_defs == ((ancilla(0), x1, x2),)
        z = ancilla(0)
        assert q.linear == {z: 6}
        assert q.quadratic == {(x1, x2): 2, (x1, z): -4, (x2, z): -4, (y1, z): 1}

    def test_penalty_zero_when_consistent(self):
        """Test that the penalty vanishes when every ancilla equals its product."""
        spec = ProblemSpec(n=15)
        p = build_objective(spec)
        q = quadratize(p, 7, spec.variables())
        for assignment in all_assignments(spec.variables()):
            assert q.energy(q.consistent_ancillas(assignment)) == p.evaluate(assignment)

    def test_same_kind_pairs_first(self):
        """Test that x-x and y-y products are substituted before mixed ones."""
        spec = ProblemSpec(n=15)
        q = quadratize(build_objective(spec), 1000, spec.variables())
        kinds = [(a.kind, b.kind) for _, a, b in q.ancilla_defs]
        assert all(ka == kb for ka, kb in kinds)

    def test_ancilla_count_factoring(self):
        """Test the ancilla budget of the 4/4-bit factoring objectives."""
        for n in (15, 91, 899):
            spec = ProblemSpec(n=n)
            poly = build_objective(spec)
            q = quadratize(poly, safe_penalty_bound(poly), spec.variables())
            assert q.num_ancillas == 12
            assert q.num_variables == 20
            assert all(v.kind != VarKind.ANCILLA or v.index < 12 for v in q.variables)

    def test_existing_ancillas_not_reused(self):
        """Test that fresh ancillas are numbered after existing ones."""
        p = MultilinearPoly({(x1, x2, ancilla(0)): 3})
        q = quadratize(p, 4)
        assert [z for z, _, _ in q.ancilla_defs] == [ancilla(1)]

    def test_soundness_random(self, random_poly):
        """Test min over ancillas equals the polynomial at the safe bound."""
        rng = random.Random(7)
        for _ in range(500):
            p = random_poly(rng, num_vars=6, max_degree=4, max_terms=8, max_coeff=100)
            originals = p.variables()
            q = quadratize(p, safe_penalty_bound(p), originals)
            reduced = min_over_ancillas(q, originals)
            for index, assignment in enumerate(all_assignments(originals[::-1])):
                # all_assignments varies its first variable slowest, so the
                # reversed order gives bit j of ``index`` to originals[j].
                assert reduced[index] == p.evaluate(assignment)

    def test_small_penalty_can_break_soundness(self):
        """Test that S below the bound may lower the minimum."""
        p = MultilinearPoly({(x1, x2, x3): -50})
        q = quadratize(p, 1, p.variables())
        reduced = min_over_ancillas(q, p.variables())
        exact = np.array([p.evaluate(a) for a in all_assignments(p.variables()[::-1])])
        assert (reduced < exact).any()
