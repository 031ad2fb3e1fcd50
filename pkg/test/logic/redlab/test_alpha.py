"""Unit tests for the corresponding module."""

from fractions import Fraction

import numpy as np
from pytest import approx, mark, raises

from redlab.alpha import (
    alpha_bruteforce,
    alpha_dp,
    bd_dominance_check,
    choose_arithmetic,
    classical_pod_pmf,
    coc_busy_profile,
    coc_law,
    cos_law,
    light_traffic_ratio,
    uniform_minimality_probe,
)
from redlab.closed import (
    coc_complete4_pmf,
    coc_hetring4_pmf,
    cos_complete4_pmf,
    cos_homring4_pmf,
    negbinom_law,
)
from redlab.exc import InvalidParameterError, SizeError, UnstableSystemError
from redlab.graph import build_complete_uniform, build_grid, build_ring, graph

COMPLETE4 = build_complete_uniform(4)
HOMRING4 = build_ring(4, Fraction(1, 2))


def _random_graph(rng: np.random.Generator):
    """Draw a small graph with rational weights."""
    n = int(rng.integers(2, 6))
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    k = int(rng.integers(1, min(6, len(pairs)) + 1))
    chosen = rng.choice(len(pairs), size=k, replace=False)
    raw = [int(w) for w in rng.integers(1, 10, size=k)]
    total = sum(raw)
    return graph(
        n,
        (
            (*pairs[int(c)], Fraction(w, total))
            for c, w in zip(chosen, raw)
        ),
    )


@mark.parametrize(
    '_, g, oracle',
    [
        ('complete4', COMPLETE4, Fraction(25, 144)),
        ('homring4', HOMRING4, Fraction(17, 96)),
        ('ring07', build_ring(4, Fraction(7, 10)), Fraction(143, 800)),
        ('ring09', build_ring(4, Fraction(9, 10)), Fraction(147, 800)),
        ('pair', build_complete_uniform(2), Fraction(1, 4)),
    ],
)
def test_alpha2(_, g, oracle):
    table = alpha_dp(g, 2, 'rational')
    assert table.rational
    assert table.alpha(0) == 1
    assert table.alpha(1) == Fraction(1, 2)
    assert table.alpha(2) == oracle


@mark.parametrize('seed', range(20))
def test_bruteforce_agrees(seed):
    """Check the DP against enumeration of edge sequences, exactly."""
    g = _random_graph(np.random.default_rng(seed))
    table = alpha_dp(g, 4, 'rational')
    for q in range(1, 5):
        assert table.alpha(q) == alpha_bruteforce(g, q, 'rational')


@mark.parametrize('seed', range(5))
def test_double_agrees(seed):
    g = _random_graph(np.random.default_rng(100 + seed))
    exact = alpha_dp(g, 6, 'rational')
    double = alpha_dp(g, 6, 'double')
    assert not double.rational
    for q in range(1, 7):
        assert double.alpha(q) == approx(float(exact.alpha(q)), rel=1e-12)


def test_isolated_servers():
    """Check that untouched servers do not change α_q."""
    small = build_complete_uniform(3)
    large = graph(6, ((e.i, e.j, e.p) for e in small.edges))
    assert alpha_dp(large, 5).values == alpha_dp(small, 5).values


@mark.parametrize('seed', range(5))
def test_relabeled(seed):
    """Check that a permutation of server ids leaves α_q unchanged."""
    rng = np.random.default_rng(200 + seed)
    g = _random_graph(rng)
    label = [0, *(int(s) + 1 for s in rng.permutation(g.n_servers))]
    moved = graph(
        g.n_servers, ((label[e.i], label[e.j], e.p) for e in g.edges)
    )
    assert alpha_dp(moved, 5, 'rational').values == (
        alpha_dp(g, 5, 'rational').values
    )


@mark.parametrize(
    'epsilon, n, q, oracle',
    [
        (Fraction(1, 2), 4, 2, 0.9804),
        (Fraction(1, 2), 4, 4, 0.9432),
        (Fraction(1, 2), 4, 10, 0.9046),
        (Fraction(1, 2), 4, 16, 0.9004),
        (Fraction(7, 10), 4, 2, 0.9713),
        (Fraction(9, 10), 4, 2, 0.9448),
        (Fraction(1, 2), 8, 10, 0.6586),
    ],
)
def test_light_traffic_ratio(epsilon, n, q, oracle):
    ratio = light_traffic_ratio(
        build_complete_uniform(n), build_ring(n, epsilon), q
    )
    assert round(float(ratio), 4) == oracle


def test_ratio_arithmetic():
    """Check that exact and double ratios agree on eight servers."""
    a, b = build_complete_uniform(8), build_ring(8, Fraction(1, 2))
    exact = light_traffic_ratio(a, b, 10, 'rational')
    double = light_traffic_ratio(a, b, 10, 'double')
    assert isinstance(exact, Fraction)
    assert double == approx(float(exact), rel=1e-12)


@mark.parametrize(
    'graphs, qmax, arithmetic, oracle',
    [
        ((COMPLETE4,), 16, 'auto', 'rational'),
        ((COMPLETE4,), 17, 'auto', 'double'),
        ((build_complete_uniform(9),), 4, 'auto', 'double'),
        ((build_ring(4, 0.7),), 4, 'auto', 'double'),
        ((build_ring(4, 0.7),), 4, 'rational', 'rational'),
        ((COMPLETE4,), 4, 'double', 'double'),
    ],
)
def test_choose_arithmetic(graphs, qmax, arithmetic, oracle):
    assert choose_arithmetic(graphs, qmax, arithmetic) == oracle


def test_dominance_holds():
    report = bd_dominance_check(COMPLETE4, HOMRING4, 16)
    assert report.holds
    assert report.first_violation is None
    assert len(report.ratios_a) == 15


def test_dominance_reversed():
    report = bd_dominance_check(HOMRING4, COMPLETE4, 16)
    assert not report.holds
    assert report.first_violation == 2


@mark.parametrize('epsilon', [Fraction(7, 10), Fraction(9, 10)])
def test_dominance_heterogeneous(epsilon):
    """Check that uneven rings have the lower first death rate."""
    assert bd_dominance_check(HOMRING4, build_ring(4, epsilon), 2).holds


@mark.parametrize('q', [2, 3])
def test_probe(q):
    report = uniform_minimality_probe(4, q, 200, 0.02, 7)
    assert len(report.differences) == 200
    assert report.min_difference >= -1e-12
    assert report.gradient_norm < 1e-6
    assert not report.rescaled


def test_probe_cut_back():
    """Check that long steps are cut back to the simplex and flagged."""
    report = uniform_minimality_probe(4, 2, 20, 1.0, 7)
    assert report.rescaled
    assert report.min_difference >= -1e-12


@mark.parametrize('rho', [0.2, 0.5, 0.8])
def test_classical_pod_two(rho):
    law = classical_pod_pmf(4, 2, rho, 15)
    oracle = coc_complete4_pmf(rho)
    assert law.counts[:3] == (1, 6, 25)
    for q, p in enumerate(law.pmf):
        assert p == approx(oracle.pmf(q), abs=1e-10)


@mark.parametrize('rho', [0.2, 0.5, 0.8])
def test_classical_pod_pooled(rho):
    law = classical_pod_pmf(4, 4, rho, 15)
    assert law.empty_prob == approx(1 - rho)
    for q, p in enumerate(law.pmf):
        assert p == approx((1 - rho) * rho**q, abs=1e-12)


def test_classical_pod_mass():
    law = classical_pod_pmf(6, 3, 0.3, 30)
    assert sum(law.pmf) == approx(1, abs=1e-9)


@mark.parametrize(
    'call, verdict',
    [
        (lambda: classical_pod_pmf(4, 5, 0.5, 4), 'd=5'),
        (lambda: classical_pod_pmf(4, 1, 0.5, 4), 'd=1'),
        (lambda: classical_pod_pmf(4, 2, 0.5, -1), 'qmax'),
        (lambda: alpha_dp(COMPLETE4, 0), 'qmax'),
        (lambda: alpha_bruteforce(COMPLETE4, 0), 'q must'),
        (lambda: uniform_minimality_probe(4, 2, 0, 0.1, 1), 'trials=0'),
    ],
)
def test_invalid(call, verdict):
    with raises(InvalidParameterError, match=verdict):
        call()


@mark.parametrize(
    'call',
    [
        lambda: classical_pod_pmf(4, 2, 0.5, 31),
        lambda: alpha_bruteforce(build_complete_uniform(8), 5),
        lambda: alpha_dp(build_complete_uniform(25), 2),
        lambda: uniform_minimality_probe(11, 2, 1, 0.1, 1),
        lambda: cos_law(build_complete_uniform(11), 0.5),
    ],
)
def test_size_guards(call):
    with raises(SizeError):
        call()


@mark.parametrize('rho', [0.2, 0.5, 0.8])
def test_coc_law_complete(rho):
    law = coc_law(COMPLETE4, rho)
    oracle = coc_complete4_pmf(rho)
    assert law.tail(0) == approx(1)
    for q in range(30):
        assert law.pmf(q) == approx(oracle.pmf(q), abs=1e-12)
        assert law.tail(q) == approx(oracle.tail(q), abs=1e-12)


@mark.parametrize('epsilon', [0.3, 0.7, 0.9])
def test_coc_law_ring(epsilon):
    law = coc_law(build_ring(4, epsilon), 0.6)
    oracle = coc_hetring4_pmf(0.6, epsilon)
    for q in range(25):
        assert law.pmf(q) == approx(oracle.pmf(q), abs=1e-12)


def test_coc_law_disjoint():
    """Check that two disjoint pairs give the negative binomial law."""
    law = coc_law(build_ring(4, 1), 0.7)
    oracle = negbinom_law(0.7)
    for q in range(25):
        assert law.pmf(q) == approx(oracle.pmf(q), abs=1e-12)


def test_coc_law_qmax():
    law = coc_law(COMPLETE4, 0.5, qmax=5)
    assert law.qmax == 5
    assert law.tail(6) == approx(coc_complete4_pmf(0.5).tail(6))


@mark.parametrize('rho', [0.3, 0.8])
def test_cos_law_complete(rho):
    law = cos_law(COMPLETE4, rho)
    oracle = cos_complete4_pmf(rho)
    for q in range(25):
        assert law.pmf(q) == approx(oracle.pmf(q), abs=1e-12)


@mark.parametrize('rho', [0.3, 0.8])
def test_cos_law_ring(rho):
    law = cos_law(HOMRING4, rho)
    oracle = cos_homring4_pmf(rho)
    for q in range(25):
        assert law.pmf(q) == approx(oracle.pmf(q), abs=1e-12)


def test_cos_law_single_pair():
    """Check that one pair under c.o.s. is an M/M/2 queue."""
    rho = 0.6
    law = cos_law(build_complete_uniform(2), rho)
    a = 2 * rho  # Offered load in servers.
    empty = 1 / (1 + a + a**2 / (2 - a))
    assert law.pmf(0) == approx(empty)
    assert law.pmf(1) == approx(empty * a)
    for q in range(2, 12):
        assert law.pmf(q) == approx(empty * a**2 / 2 * rho ** (q - 2))


def test_busy_profile():
    profile = coc_busy_profile(COMPLETE4, 6)
    table = alpha_dp(COMPLETE4, 6, 'double')
    assert profile[:2] == (0.0, 2.0)
    assert profile[2] == approx(2.88)
    # Reversibility: μ·E[busy | q]·π_q = Nλ·π_{q−1}.
    for q in range(1, 7):
        assert profile[q] == approx(table.alpha(q - 1) / table.alpha(q))


@mark.parametrize(
    'call, error',
    [
        (lambda: coc_law(COMPLETE4, 1.0), UnstableSystemError),
        (lambda: coc_law(COMPLETE4, 0.0), InvalidParameterError),
        (lambda: cos_law(COMPLETE4, 1.2), UnstableSystemError),
        (
            lambda: coc_law(
                graph(4, [(1, 2, Fraction(5, 7)), (3, 4, Fraction(2, 7))]),
                0.875,
            ),
            UnstableSystemError,
        ),
    ],
)
def test_unstable(call, error):
    with raises(error):
        call()


def test_grid_alpha():
    """Check that a 3 × 3 grid trails the complete graph in light traffic."""
    ratio = light_traffic_ratio(
        build_complete_uniform(9), build_grid(9), 4, 'double'
    )
    assert ratio < 1
