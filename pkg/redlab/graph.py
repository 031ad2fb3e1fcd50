"""Standard compatibility graphs and the stability test.

Weights are kept exact wherever the inputs are exact, so the uniform complete
graph, rings with rational ε and grids are all rational by default.

"""

import logging
from collections import defaultdict
from fractions import Fraction
from math import comb, inf, isqrt
from typing import Any, Iterable

import numpy as np

from redlab.data.model import (
    Edge,
    EdgeWeightedGraph,
    StabilityReport,
    SystemParams,
)
from redlab.data.util import Weight, popcount, servers, weight
from redlab.exc import InvalidParameterError, SizeError

log = logging.getLogger(__name__)

#############
# INTERFACE #
#############

MAX_SCAN_EDGES = 30
MAX_SCAN_SERVERS = 24


def graph(
    n: int,
    triples: Iterable[tuple[int, int, Any]],
    name: str = 'custom',
) -> EdgeWeightedGraph:
    """Build a graph from (i, j, p) triples in any server order.

    Drop zero-weight pairs, leaving the set of edges that can occur.

    """
    edges = []
    for i, j, p in triples:
        w = weight(p)
        if w == 0:
            continue
        edges.append(Edge(min(i, j), max(i, j), w))
    return EdgeWeightedGraph(n, tuple(edges), name)


def build_complete_uniform(n: int) -> EdgeWeightedGraph:
    """Build the classical power-of-two graph: all pairs, equally likely."""
    if n < 2:
        raise InvalidParameterError(f'Cannot build a graph on {n} servers.')
    p = Fraction(1, comb(n, 2))
    return graph(
        n,
        ((i, j, p) for i in range(1, n + 1) for j in range(i + 1, n + 1)),
        'complete-uniform',
    )


def build_ring(n: int, epsilon: Any) -> EdgeWeightedGraph:
    """Build a ring with alternating weights ε·2/N and (1 − ε)·2/N.

    Pair {i, i + 1} takes ε·2/N for even i, with {N, 1} counted as i = N. At
    ε = 1/2 the ring is homogeneous. At ε ∈ {0, 1} half of the pairs vanish,
    leaving N/2 disjoint edges.

    """
    if n < 4 or n % 2:
        raise InvalidParameterError(
            f'A ring needs an even number of servers, at least 4, not {n}.'
        )
    eps = weight(epsilon)
    if not 0 <= eps <= 1:
        raise InvalidParameterError(f'Epsilon {eps} lies outside [0, 1].')
    scale = Fraction(2, n) if isinstance(eps, Fraction) else 2 / n
    triples = []
    for i in range(1, n + 1):
        share = eps if i % 2 == 0 else 1 - eps
        triples.append((i, i % n + 1, share * scale))
    return graph(n, triples, f'ring-{eps}')


def build_grid(n: int) -> EdgeWeightedGraph:
    """Build a toroidal √N × √N grid with 2N equally likely edges.

    Server (r, c), counted from zero, has id r·√N + c + 1. At √N = 2, the
    wrap-around edges double up and are merged with their summed weight.

    """
    k = isqrt(n) if n >= 0 else 0
    if k * k != n or k < 2:
        raise InvalidParameterError(
            f'A grid needs a square number of servers, at least 4, not {n}.'
        )
    p = Fraction(1, 2 * n)
    merged: dict[tuple[int, int], Fraction] = defaultdict(Fraction)
    for r in range(k):
        for c in range(k):
            here = r * k + c + 1
            for there in ((r + 1) % k * k + c + 1, r * k + (c + 1) % k + 1):
                merged[(min(here, there), max(here, there))] += p
    return graph(n, ((i, j, w) for (i, j), w in merged.items()), 'grid')


def check_stability(
    graph: EdgeWeightedGraph, params: SystemParams
) -> StabilityReport:
    """Scan all non-empty subsets S of edges for local overload.

    The system is stable iff Nλ·Σ_{e∈S} p_e < μ·|∪ S| for every S. Report the
    tightest subset, whether violating or not, through the slack.

    """
    _check_match(graph, params)
    m = len(graph.edges)
    if m > MAX_SCAN_EDGES:
        raise SizeError(
            f'Cannot scan all subsets of {m} edges; '
            f'the limit is {MAX_SCAN_EDGES}.'
        )

    rate = params.total_arrival_rate
    mu = params.service_speed
    masks = compact_masks(graph)
    half = m // 2
    lo_sum, lo_union = _subset_tables(graph.weights[:half], masks[:half])
    hi_sum, hi_union = _subset_tables(graph.weights[half:], masks[half:])

    best = inf
    best_index = (0, 0)
    for h in range(len(hi_sum)):
        slack = mu * popcount(lo_union | hi_union[h]) - rate * (
            lo_sum + hi_sum[h]
        )
        if h == 0:
            slack[0] = inf  # The empty subset.
        lo = int(np.argmin(slack))
        if slack[lo] < best:
            best = float(slack[lo])
            best_index = (lo, h)

    chosen = _unpack(best_index[0], 0) + _unpack(best_index[1], half)
    return _report(graph, params, best, chosen, 'edges')


def check_stability_induced(
    graph: EdgeWeightedGraph, params: SystemParams
) -> StabilityReport:
    """Check stability through server subsets instead of edge subsets.

    For a subset S of edges with endpoints U, the edges induced by U carry at
    least the weight of S over the same endpoints, so checking the induced
    edge set of every server subset U is equivalent and costs O(2^N).

    """
    _check_match(graph, params)
    masks = compact_masks(graph)
    k = graph.covered.bit_count()
    if k > MAX_SCAN_SERVERS:
        raise SizeError(
            f'Cannot scan all subsets of {k} servers; '
            f'the limit is {MAX_SCAN_SERVERS}.'
        )

    subsets = np.arange(1 << k, dtype=np.uint64)
    inside = np.zeros(1 << k)
    union = np.zeros(1 << k, dtype=np.uint64)
    for p, mask in zip(graph.weights, masks):
        m = np.uint64(mask)
        hit = (subsets & m) == m
        inside[hit] += float(p)
        union[hit] |= m

    slack = params.service_speed * popcount(
        union
    ) - params.total_arrival_rate * inside
    slack[inside == 0] = inf
    u = int(np.argmin(slack))
    chosen = [
        n
        for n, mask in enumerate(masks)
        if (u & mask) == mask  # Induced by the tightest server subset.
    ]
    return _report(graph, params, float(slack[u]), chosen, 'servers')


def check_stability_necessary(
    graph: EdgeWeightedGraph, params: SystemParams
) -> StabilityReport:
    """Check only λ < μ, i.e. the full set of edges over all servers."""
    _check_match(graph, params)
    everything = list(range(len(graph.edges)))
    slack = (
        params.service_speed * graph.covered.bit_count()
        - params.total_arrival_rate
    )
    return _report(graph, params, slack, everything, 'necessary', True)


def stability(
    graph: EdgeWeightedGraph, params: SystemParams
) -> StabilityReport:
    """Check stability as thoroughly as the size of the graph permits."""
    try:
        return check_stability(graph, params)
    except SizeError as exc:
        log.debug('%s Scanning server subsets instead.', exc)
    try:
        return check_stability_induced(graph, params)
    except SizeError as exc:
        log.warning('%s Checking only the necessary condition.', exc)
    return check_stability_necessary(graph, params)


def compact_masks(graph: EdgeWeightedGraph) -> list[int]:
    """Renumber touched servers from zero so that masks fit 64 bits.

    Servers that no edge touches are left out.

    """
    index = {s: n for n, s in enumerate(servers(graph.covered))}
    return [(1 << index[e.i]) | (1 << index[e.j]) for e in graph.edges]


############
# INTERNAL #
############


def _check_match(graph: EdgeWeightedGraph, params: SystemParams) -> None:
    if graph.n_servers != params.n_servers:
        raise InvalidParameterError(
            f'Graph has {graph.n_servers} servers but parameters '
            f'have n_servers={params.n_servers}.'
        )


def _subset_tables(
    weights: Iterable[Weight], masks: Iterable[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate weight sum and server union for every subset of some edges.

    Bit k of a table index selects edge k.

    """
    total = np.zeros(1)
    union = np.zeros(1, dtype=np.uint64)
    for p, mask in zip(weights, masks):
        total = np.concatenate((total, total + float(p)))
        union = np.concatenate((union, union | np.uint64(mask)))
    return total, union


def _unpack(index: int, offset: int) -> list[int]:
    return [offset + k for k in range(index.bit_length()) if index >> k & 1]


def _report(
    graph: EdgeWeightedGraph,
    params: SystemParams,
    slack: float,
    chosen: list[int],
    method: str,
    partial: bool = False,
) -> StabilityReport:
    tolerance = 1e-12 * max(1.0, params.service_speed * params.n_servers)
    if slack > tolerance:
        return StabilityReport(
            True, slack, method=method, partial=partial
        )
    edges = tuple(graph.edges[n] for n in chosen)
    union = 0
    for e in edges:
        union |= e.mask
    arrival = params.total_arrival_rate * float(sum(e.p for e in edges))
    service = params.service_speed * union.bit_count()
    return StabilityReport(
        False,
        slack,
        violating_edges=edges,
        violating_arrival_rate=arrival,
        violating_service_rate=service,
        method=method,
        partial=partial,
    )
