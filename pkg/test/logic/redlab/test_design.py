"""Unit tests for the corresponding module."""

from itertools import product

import numpy as np
from pytest import approx, mark, raises

from redlab import design
from redlab.alpha import alpha_dp
from redlab.data.model import Assignment, DesignProblem, SystemParams
from redlab.design import alpha2, feasible, induced_probabilities, optimize
from redlab.exc import InvalidParameterError

EQUAL = DesignProblem(4, (1.0, 1.0))
OVERLOADED_TYPE = DesignProblem(4, (2.5, 1.0))
RING = ((1, 2), (2, 3), (3, 4), (1, 4))


def test_induced():
    g = induced_probabilities(
        DesignProblem(4, (3.0, 1.0)), Assignment(((1, 2), (4, 3)))
    )
    assert g.name == 'design'
    assert g.weight_of(1, 2) == approx(0.75)
    assert g.weight_of(3, 4) == approx(0.25)
    assert g.weight_of(1, 3) == 0


def test_induced_shared():
    """Check that types on the same pair add up."""
    g = induced_probabilities(EQUAL, Assignment(((1, 2), (1, 2))))
    assert len(g.edges) == 1
    assert g.weight_of(1, 2) == approx(1)


@mark.parametrize(
    '_, pairs, oracle',
    [
        ('same', ((1, 2), (1, 2)), 0.25),
        ('shared', ((1, 2), (2, 3)), 0.5 / 2.4),
        ('disjoint', ((1, 2), (3, 4)), 0.1875),
    ],
)
def test_alpha2_values(_, pairs, oracle):
    g = induced_probabilities(EQUAL, Assignment(pairs))
    p = np.array([float(e.p) for e in g.edges])
    sizes = np.array(
        [[len({e.i, e.j, f.i, f.j}) for f in g.edges] for e in g.edges]
    )
    assert alpha2(p, sizes) == approx(oracle)


def test_optimal_equal_rates():
    solution = optimize(EQUAL)
    assert solution.status == 'optimal'
    assert solution.alpha2 == approx(0.1875)
    assert solution.assignment.pairs == ((1, 2), (3, 4))
    assert solution.stability.stable
    assert solution.alpha3 is not None and solution.alpha4 is not None
    assert solution.evaluated == 1


def test_optimal_by_enumeration():
    """Check the optimum against a plain scan of all stable assignments."""
    problem = DesignProblem(4, (1.2, 0.8, 0.5))
    best = None
    for pairs in product(problem.edges, repeat=problem.n_types):
        assignment = Assignment(pairs)
        stable, _ = feasible(problem, assignment)
        if not stable:
            continue
        g = induced_probabilities(problem, assignment)
        value = alpha_dp(g, 2, 'double').alpha(2)
        if best is None or value < best - design.TIE_TOLERANCE:
            best = value
    solution = optimize(problem)
    assert solution.status == 'optimal'
    assert solution.alpha2 == approx(best)


def test_optimal_matching():
    solution = optimize(DesignProblem(6, (1.0, 1.0, 1.0)))
    assert solution.alpha2 == approx(1 / 6)
    covered = {s for pair in solution.assignment.pairs for s in pair}
    assert covered == {1, 2, 3, 4, 5, 6}


def test_candidate_edges():
    solution = optimize(DesignProblem(4, (1.0, 1.0), candidate_edges=RING))
    assert solution.assignment.pairs == ((1, 2), (3, 4))


def test_infeasible():
    """Check a load below capacity that no pair can carry."""
    solution = optimize(OVERLOADED_TYPE)
    assert solution.status == 'infeasible'
    assert not solution.stability.stable
    assert solution.evaluated == 6**2
    assert solution.stability.slack == approx(-0.5)


def test_heuristic(monkeypatch):
    monkeypatch.setattr(design, 'MAX_ASSIGNMENTS', 1)
    solution = optimize(EQUAL)
    assert solution.status == 'heuristic'
    assert solution.alpha2 == approx(0.1875)
    assert solution.assignment.pairs == ((1, 2), (3, 4))


def test_heuristic_infeasible(monkeypatch):
    monkeypatch.setattr(design, 'MAX_ASSIGNMENTS', 1)
    solution = optimize(OVERLOADED_TYPE)
    assert solution.status == 'infeasible'


@mark.parametrize(
    '_, problem, pairs, verdict',
    [
        ('disjoint', EQUAL, ((1, 2), (3, 4)), True),
        ('reversed', EQUAL, ((2, 1), (4, 3)), True),
        ('overloaded', OVERLOADED_TYPE, ((1, 2), (3, 4)), False),
    ],
)
def test_feasible(_, problem, pairs, verdict):
    stable, report = feasible(problem, Assignment(pairs))
    assert stable is verdict
    assert report is not None
    assert report.stable is verdict


@mark.parametrize(
    '_, problem, pairs',
    [
        ('short', EQUAL, ((1, 2),)),
        ('long', EQUAL, ((1, 2), (3, 4), (1, 3))),
        (
            'inadmissible',
            DesignProblem(4, (1.0, 1.0), candidate_edges=RING),
            ((1, 3), (2, 4)),
        ),
    ],
)
def test_not_total(_, problem, pairs):
    assert feasible(problem, Assignment(pairs)) == (False, None)


def test_feasible_service_speed():
    """Check that parameters contribute their service speed only."""
    stable, _ = feasible(
        OVERLOADED_TYPE, Assignment(((1, 2), (3, 4))), SystemParams(4, 9, 2)
    )
    assert stable


def test_feasible_mismatch():
    with raises(InvalidParameterError, match='n_servers=6'):
        feasible(EQUAL, Assignment(((1, 2), (3, 4))), SystemParams(6, 0.5))


def test_induced_inadmissible():
    with raises(InvalidParameterError, match=r'Type 2: pair \{1, 3\}'):
        induced_probabilities(
            DesignProblem(4, (1.0, 1.0), candidate_edges=RING),
            Assignment(((1, 2), (1, 3))),
        )
