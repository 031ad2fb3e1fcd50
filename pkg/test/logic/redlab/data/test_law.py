"""Unit tests for the corresponding module."""

from pydantic import ValidationError
from pytest import approx, mark, raises

from redlab.data.law import (
    DifferenceTerm,
    SpectralDistribution,
    SpectralTerm,
    TabulatedDistribution,
)
from redlab.exc import InvalidParameterError

GEOMETRIC = SpectralDistribution(0.5, (SpectralTerm(1, 0.5),))


@mark.parametrize('q', [0, 1, 4])
def test_geometric(q):
    assert GEOMETRIC.pmf(q) == approx(0.5 ** (q + 1))
    assert GEOMETRIC.tail(q) == approx(0.5**q)
    assert GEOMETRIC.cdf(q) == approx(1 - 0.5 ** (q + 1))


def test_negative_q():
    assert GEOMETRIC.pmf(-1) == 0
    assert GEOMETRIC.cdf(-1) == 0
    assert GEOMETRIC.tail(-3) == approx(1)


@mark.parametrize('q', [0, 1, 3, 7])
def test_linear_term_sum(q):
    """Check the closed sum of q′·b^q′ against a long partial sum."""
    term = SpectralTerm(2.0, 0.6, 1)
    assert term.sum_from(q) == approx(
        sum(term.at(k) for k in range(q, 400))
    )


def test_special_empty():
    dist = SpectralDistribution(
        0.25, (SpectralTerm(1, 0.5),), special_q0=0.75
    )
    assert dist.pmf(0) == 0.75
    assert dist.pmf(1) == approx(0.125)
    assert dist.total() == approx(1)
    assert dist.tail(0) == approx(1)


@mark.parametrize(
    'args',
    [(1.0, 1.0), (1.0, -0.1), (1.0, 0.5, 2)],
)
def test_term_invalid(args):
    with raises(ValidationError):
        SpectralTerm(*args)


def test_mixture_empty():
    with raises(InvalidParameterError, match='at least one term'):
        SpectralDistribution(1.0, ())


def test_tabulated():
    dist = TabulatedDistribution((0.5, 0.25, 0.125), 0.125)
    assert dist.qmax == 2
    assert dist.pmf(3) == 0
    assert dist.tail(0) == approx(1)
    assert dist.tail(2) == approx(0.25)
    assert dist.tail(3) == approx(0.125)
    assert dist.tail(10) == approx(0.125)
    assert dist.cdf(1) == approx(0.75)
    assert dist.cdf(-1) == 0
    assert dist.mean() == approx(0.5)


@mark.parametrize('other', [0.3, 0.5 - 1e-9, 0.5, 0.5 + 1e-9, 0.7])
@mark.parametrize('q', [0, 1, 2, 9])
def test_difference(other, q):
    term = DifferenceTerm(2.0, 0.5, other)
    if abs(other - 0.5) < 1e-6:
        oracle = 2 * q * 0.5 ** (q - 1) if q else 0
    else:
        oracle = 2 * (other**q - 0.5**q) / (other - 0.5)
    assert term.at(q) == approx(oracle, rel=1e-7, abs=1e-15)
    assert term.sum_from(q) == approx(
        sum(term.at(k) for k in range(q, 600)), rel=1e-9
    )


def test_difference_mixture():
    """Check that a merged pair sums like its two geometric terms."""
    pair = SpectralDistribution(
        0.5, (SpectralTerm(10, 0.6), SpectralTerm(-10, 0.4))
    )
    merged = SpectralDistribution(0.5, (DifferenceTerm(2, 0.4, 0.6),))
    for q in range(10):
        assert merged.pmf(q) == approx(pair.pmf(q))
        assert merged.tail(q) == approx(pair.tail(q))
