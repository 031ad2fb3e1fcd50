"""Unit tests for the corresponding module."""

from contextlib import nullcontext as does_not_raise
from fractions import Fraction

from pydantic import TypeAdapter, ValidationError
from pytest import mark, raises

from redlab.data.model import (
    Assignment,
    DesignProblem,
    Edge,
    EdgeWeightedGraph,
    StabilityReport,
    SystemParams,
)
from redlab.exc import InvalidParameterError


def test_params():
    params = SystemParams(4, 1.5, 2.0)
    assert params.load == 0.75
    assert params.total_arrival_rate == 6.0
    assert SystemParams.at_load(4, 0.75, 2.0) == params


@mark.parametrize(
    '_, args, verdict',
    [
        ('idle', (2, 0.0), does_not_raise()),
        ('one_server', (1, 0.5), raises(ValidationError)),
        ('negative_rate', (4, -0.1), raises(ValidationError)),
        ('zero_speed', (4, 0.5, 0.0), raises(ValidationError)),
    ],
)
def test_params_validation(_, args, verdict):
    with verdict:
        SystemParams(*args)


@mark.parametrize(
    'raw, oracle',
    [
        ('1/4', Fraction(1, 4)),
        ('0.35', Fraction(7, 20)),
        (1, Fraction(1)),
        (0.25, 0.25),
    ],
)
def test_edge_weight(raw, oracle):
    edge = Edge(1, 2, raw)
    assert edge.p == oracle
    assert type(edge.p) is type(oracle)
    assert edge.mask == 0b11
    assert edge.pair == (1, 2)


def test_edge_serialized():
    """Check that exact weights serialize as strings and parse back."""
    adapter = TypeAdapter(Edge)
    edge = Edge(2, 4, Fraction(1, 3))
    data = adapter.dump_python(edge, mode='json')
    assert data == {'i': 2, 'j': 4, 'p': '1/3'}
    assert adapter.validate_python(data) == edge


def test_graph_masks():
    g = EdgeWeightedGraph(
        5, (Edge(1, 2, Fraction(1, 2)), Edge(2, 4, Fraction(1, 2)))
    )
    assert g.exact
    assert g.masks == (0b11, 0b1010)
    assert g.covered == 0b1011
    assert g.weight_of(4, 2) == Fraction(1, 2)
    assert g.weight_of(1, 5) == 0


def test_graph_double():
    g = EdgeWeightedGraph(
        4, (Edge(1, 2, 0.1 + 0.2), Edge(3, 4, 0.7))
    )
    assert not g.exact
    assert isinstance(g.weight_of(1, 3), float)


@mark.parametrize(
    '_, n, edges, verdict',
    [
        ('empty', 4, (), 'at least one edge'),
        ('order', 4, (Edge(2, 1, 1),), 'lower server id first'),
        ('inexact_sum', 4, (Edge(1, 2, Fraction(1, 3)),), 'sum to 1/3'),
        ('double_sum', 4, (Edge(1, 2, 0.5),), r'sum to 0\.5'),
    ],
)
def test_graph_invalid(_, n, edges, verdict):
    with raises(InvalidParameterError, match=verdict):
        EdgeWeightedGraph(n, edges)


def test_report_consistency():
    with raises(InvalidParameterError, match='if and only if'):
        StabilityReport(True, 0.5, (Edge(1, 2, 1),))
    with raises(InvalidParameterError, match='if and only if'):
        StabilityReport(False, -0.5)


def test_report_partial():
    report = StabilityReport(True, 0.25, method='necessary', partial=True)
    assert report.describe() == (
        'Stable with slack 0.25 (necessary condition only).'
    )


def test_problem_edges():
    problem = DesignProblem(4, (1.0,), candidate_edges=((2, 1), (4, 3)))
    assert problem.edges == ((1, 2), (3, 4))
    assert problem.total_rate == 1.0
    assert problem.params == SystemParams(4, 0.25)
    assert len(DesignProblem(5, (1.0,)).edges) == 10


@mark.parametrize(
    '_, kwargs, verdict',
    [
        ('no_types', {'type_rates': ()}, 'at least one job type'),
        ('no_pairs', {'candidate_edges': ()}, 'at least one pair'),
        ('loop', {'candidate_edges': ((1, 1),)}, 'a loop'),
        ('range', {'candidate_edges': ((1, 7),)}, r'1\.\.4'),
        ('duplicate', {'candidate_edges': ((1, 2), (2, 1))}, 'duplicate'),
    ],
)
def test_problem_invalid(_, kwargs, verdict):
    arguments = {'n_servers': 4, 'type_rates': (1.0,), **kwargs}
    with raises(InvalidParameterError, match=verdict):
        DesignProblem(**arguments)


def test_assignment_description():
    assert Assignment(((1, 2), (3, 4))).describe() == (
        'type 1 → {1, 2}, type 2 → {3, 4}'
    )
