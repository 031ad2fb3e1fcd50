"""Coverage polynomials α_q and what follows from them.

α_q(P) is the sum, over all sequences of q edges, of the products
Π_i p_{c_i}/|c_1 ∪ … ∪ c_i|. Under cancel-on-completion redundancy,
ℙ{Q = q} = ℙ{Q = 0}·α_q·(Nρ)^q, so the α_q carry the whole law of the total
number of jobs and, as ρ ↓ 0, its light-traffic fingerprint.

The coverage DP below keeps one layer of weights on subsets of servers at a
time. Layer q maps each union S of q placed edges to its accumulated weight,
and α_q is the sum of the layer.

"""

import logging
from collections import defaultdict
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, prod
from typing import Iterable, Iterator, Literal

import numpy as np

from redlab.data.law import TabulatedDistribution
from redlab.data.model import EdgeWeightedGraph, SystemParams
from redlab.data.result import (
    AlphaTable,
    ClassicalPodLaw,
    DominanceReport,
    ProbeReport,
)
from redlab.data.util import Arithmetic, Weight, convert, popcount
from redlab.exc import InvalidParameterError, SizeError, UnstableSystemError
from redlab.graph import build_complete_uniform, compact_masks, stability

log = logging.getLogger(__name__)

#############
# INTERFACE #
#############

ArithmeticChoice = Literal['auto', 'rational', 'double']

MAX_DP_SERVERS = 24
MAX_BRUTEFORCE_SEQUENCES = 10**7
MAX_PROBE_SERVERS = 10
MAX_POD_Q = 30
MAX_COS_SERVERS = 10
MAX_LAYERS = 20_000

# Auto arithmetic is exact up to these sizes.
RATIONAL_MAX_SERVERS = 8
RATIONAL_MAX_Q = 16


def choose_arithmetic(
    graphs: Iterable[EdgeWeightedGraph],
    qmax: int,
    arithmetic: ArithmeticChoice = 'auto',
) -> Arithmetic:
    """Resolve automatic arithmetic for a set of graphs."""
    if arithmetic != 'auto':
        return arithmetic
    graphs = list(graphs)
    if (
        all(g.exact for g in graphs)
        and max(g.n_servers for g in graphs) <= RATIONAL_MAX_SERVERS
        and qmax <= RATIONAL_MAX_Q
    ):
        return 'rational'
    return 'double'


def alpha_dp(
    graph: EdgeWeightedGraph,
    qmax: int,
    arithmetic: ArithmeticChoice = 'auto',
) -> AlphaTable:
    """Compute α_1 … α_qmax by the layered coverage DP.

    Cost is O(qmax·2^N·|edges|). Forced rational arithmetic on a graph with
    double weights uses the exact binary values of those weights.

    """
    if qmax < 1:
        raise InvalidParameterError(f'qmax must be at least 1, not {qmax}.')
    if graph.n_servers > MAX_DP_SERVERS:
        raise SizeError(
            f'Coverage DP over 2^{graph.n_servers} subsets refused; '
            f'the limit is N = {MAX_DP_SERVERS}.'
        )
    mode = choose_arithmetic([graph], qmax, arithmetic)
    masks = compact_masks(graph)
    if mode == 'rational':
        weights = [Fraction(p) for p in graph.weights]
        layers: Iterator[Weight] = _rational_layers(masks, weights)
    else:
        layers = _double_layers(
            masks,
            np.array([float(p) for p in graph.weights]),
            graph.covered.bit_count(),
        )
    values = tuple(next(layers) for _ in range(qmax))
    return AlphaTable(graph.name, values, mode == 'rational')


def alpha_bruteforce(
    graph: EdgeWeightedGraph,
    q: int,
    arithmetic: ArithmeticChoice = 'auto',
) -> Weight:
    """Compute α_q by enumerating all |edges|^q sequences of edges."""
    if q < 1:
        raise InvalidParameterError(f'q must be at least 1, not {q}.')
    n_sequences = len(graph.edges) ** q
    if n_sequences > MAX_BRUTEFORCE_SEQUENCES:
        raise SizeError(
            f'Enumeration of {n_sequences} sequences refused; '
            f'the limit is {MAX_BRUTEFORCE_SEQUENCES}.'
        )
    mode = choose_arithmetic([graph], q, arithmetic)
    edges = [(e.mask, convert(e.p, mode)) for e in graph.edges]
    one = convert(1, mode)

    def walk(union: int, depth: int) -> Weight:
        if depth == q:
            return one
        total = 0 * one
        for mask, p in edges:
            u = union | mask
            total += p / u.bit_count() * walk(u, depth + 1)
        return total

    return walk(0, 0)


def light_traffic_ratio(
    graph_a: EdgeWeightedGraph,
    graph_b: EdgeWeightedGraph,
    q: int,
    arithmetic: ArithmeticChoice = 'auto',
) -> Weight:
    """Return α_q(A)/α_q(B).

    This is the limit of ℙ{Q(A) ≥ q}/ℙ{Q(B) ≥ q} as λ ↓ 0.

    """
    _check_same_size(graph_a, graph_b)
    mode = choose_arithmetic([graph_a, graph_b], q, arithmetic)
    a = alpha_dp(graph_a, q, mode).alpha(q)
    b = alpha_dp(graph_b, q, mode).alpha(q)
    return a / b


def bd_dominance_check(
    graph_a: EdgeWeightedGraph,
    graph_b: EdgeWeightedGraph,
    qmax: int,
    arithmetic: ArithmeticChoice = 'auto',
) -> DominanceReport:
    """Check α_{q−1}(A)/α_q(A) ≥ α_{q−1}(B)/α_q(B) for 2 ≤ q ≤ qmax.

    The total number of jobs is a birth–death process with birth rate Nλ and
    death rate from state q equal to Nλ·α_{q−1}/α_q. Larger death rates at
    every q are sufficient for Q(A) ≤st Q(B). A report that holds up to qmax
    is evidence for the ordering, not proof.

    """
    if qmax < 2:
        raise InvalidParameterError(f'qmax must be at least 2, not {qmax}.')
    _check_same_size(graph_a, graph_b)
    mode = choose_arithmetic([graph_a, graph_b], qmax, arithmetic)
    table_a = alpha_dp(graph_a, qmax, mode)
    table_b = alpha_dp(graph_b, qmax, mode)
    ratios_a = _death_ratios(table_a)
    ratios_b = _death_ratios(table_b)
    first_violation = None
    for q, (ra, rb) in enumerate(zip(ratios_a, ratios_b), start=2):
        if ra < rb:
            first_violation = q
            break
    return DominanceReport(
        qmax, first_violation is None, first_violation, ratios_a, ratios_b
    )


def uniform_minimality_probe(
    n: int, q: int, trials: int, step: float, seed: int
) -> ProbeReport:
    """Perturb uniform weights on the complete graph in random directions.

    Each direction is a standard normal vector over the edges with its mean
    projected out, scaled to unit length. α_q is evaluated at both uniform ±
    step·d; a step that would make a weight negative is cut back to the
    boundary of the simplex and the trial is flagged.

    """
    if n > MAX_PROBE_SERVERS:
        raise SizeError(
            f'Probe on {n} servers refused; the limit is {MAX_PROBE_SERVERS}.'
        )
    if q < 1 or trials < 1 or step < 0:
        raise InvalidParameterError(
            f'Cannot probe with q={q}, trials={trials}, step={step}.'
        )
    graph = build_complete_uniform(n)
    masks = compact_masks(graph)
    m = len(masks)
    uniform = np.full(m, 1 / m)
    alpha_0 = _alpha_at(masks, uniform, n, q)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

    differences = []
    rescaled = []
    for trial in range(trials):
        d = rng.standard_normal(m)
        d -= d.mean()
        norm = np.linalg.norm(d)
        if m == 1 or norm == 0:
            differences.append(0.0)
            continue
        d /= norm
        cut = False
        lesser = np.inf
        for direction in (d, -d):
            reach = _reach(uniform, direction)
            s = step
            if s > reach:
                s = reach
                cut = True
            weights = np.maximum(uniform + s * direction, 0.0)
            lesser = min(lesser, _alpha_at(masks, weights, n, q) - alpha_0)
        differences.append(float(lesser))
        if cut:
            rescaled.append(trial)
    if rescaled:
        log.warning(
            '%d of %d probe trials were cut back to the simplex boundary.',
            len(rescaled),
            trials,
        )

    return ProbeReport(
        n,
        q,
        step,
        float(alpha_0),
        tuple(differences),
        _projected_gradient_norm(masks, uniform, n, q),
        tuple(rescaled),
    )


def classical_pod_pmf(
    n: int, d: int, rho: float, qmax: int
) -> ClassicalPodLaw:
    """Compute the law of the classical power-of-d policy on N servers.

    With a_i = C(i − 1, d − 1) for i = d … N and F_j their elementary
    symmetric sums, ℙ{Q = q}/ℙ{Q = 0} = S(q)·(ρ/C(N − 1, d − 1))^q, where
    S(q) sums (−1)^{|m|+q}·|m|!·Π_j F_j^{m_j}/m_j! over all vectors m with
    Σ_j j·m_j = q. The ratio series generates 1/Π_i(1 − a_i·x), so the
    normalization is exact: ℙ{Q = 0} = Π_i(1 − ρ·a_i/C(N − 1, d − 1)).

    """
    if not 2 <= d <= n:
        raise InvalidParameterError(f'd={d} must lie in [2, N={n}].')
    _check_load(rho)
    if qmax < 0:
        raise InvalidParameterError(f'qmax must not be negative, not {qmax}.')
    if qmax > MAX_POD_Q:
        raise SizeError(
            f'qmax={qmax} refused; partitions grow too fast beyond '
            f'{MAX_POD_Q}.'
        )
    a = _selection_counts(n, d)
    f = _elementary_sums(n, d)
    scale = comb(n - 1, d - 1)
    x = rho / scale
    counts = tuple(_partition_sum(q, f) for q in range(qmax + 1))
    ratios = tuple(c * x**q for q, c in enumerate(counts))
    empty = prod(1 - x * ai for ai in a)
    return ClassicalPodLaw(n, d, rho, counts, ratios, empty)


def coc_law(
    graph: EdgeWeightedGraph, rho: float, qmax: int | None = None
) -> TabulatedDistribution:
    """Compute the cancel-on-completion law of Q for any small graph.

    The series α_q·(Nρ)^q is extended until its geometric tail is below
    1e-14 of the accumulated mass, then normalized. Probabilities are
    itemized up to qmax, or as far as the series went.

    """
    _check_load(rho)
    _require_stable(graph, rho)
    layers = _double_layers(
        compact_masks(graph),
        np.array([float(p) for p in graph.weights]),
        graph.covered.bit_count(),
    )
    factor = graph.n_servers * rho
    terms = [1.0]
    terms.extend(
        _series(
            (a * factor**q for q, a in enumerate(layers, start=1)),
            rho,
            1.0,
        )
    )
    return _tabulate(terms, qmax)


def coc_busy_profile(
    graph: EdgeWeightedGraph, qmax: int
) -> tuple[float, ...]:
    """Return E[busy servers | Q = q] for q = 0 … qmax under c.o.c.

    Given q jobs, the busy servers are the union of their edges, so the
    conditional mean is the |S|-weighted average of coverage layer q. The
    departure rate from q is μ times this value.

    """
    if qmax < 0:
        raise InvalidParameterError(f'qmax must not be negative, not {qmax}.')
    k = graph.covered.bit_count()
    if k > MAX_DP_SERVERS:
        raise SizeError(
            f'Coverage DP over 2^{k} subsets refused; '
            f'the limit is N = {MAX_DP_SERVERS}.'
        )
    counts = popcount(np.arange(1 << k, dtype=np.int64))
    profile = [0.0]
    layers = _dense_layers(
        compact_masks(graph), np.array([float(p) for p in graph.weights]), k
    )
    for _, layer in zip(range(qmax), layers):
        profile.append(float(np.dot(counts, layer) / layer.sum()))
    return tuple(profile)


def cos_law(
    graph: EdgeWeightedGraph, rho: float, qmax: int | None = None
) -> TabulatedDistribution:
    """Compute the cancel-on-start law of Q, with ALIS, for a small graph.

    The product form weighs waiting jobs as in the coverage DP, over edges
    inside the busy set only, and idle servers by their order of becoming
    idle. Summing over orders, the idle weight of a set S is
    f(S) = Σ_{u∈S} f(S∖u)/(Nρ·Σ_{e∩S≠∅} p_e), with f(∅) = 1. The total number
    of jobs is the number of waiting jobs plus busy servers.

    """
    _check_load(rho)
    k = graph.covered.bit_count()
    if k > MAX_COS_SERVERS:
        raise SizeError(
            f'Cancel-on-start law on {k} servers refused; '
            f'the limit is {MAX_COS_SERVERS}.'
        )
    _require_stable(graph, rho)
    masks = compact_masks(graph)
    weights = np.array([float(p) for p in graph.weights])
    factor = graph.n_servers * rho
    full = (1 << k) - 1
    idle = _idle_weights(masks, weights, k, factor)
    floor = float(idle.sum())  # The mass without waiting jobs.

    terms: list[float] = []
    for busy in range(full + 1):
        n_busy = busy.bit_count()
        inside = [
            n for n, mask in enumerate(masks) if mask & busy == mask
        ]
        series = [float(idle[full ^ busy])]
        if inside:
            layers = _double_layers(
                [masks[n] for n in inside], weights[inside], k
            )
            series.extend(
                _series(
                    (
                        series[0] * a * factor**q
                        for q, a in enumerate(layers, start=1)
                    ),
                    rho,
                    floor,
                )
            )
        if len(terms) < n_busy + len(series):
            terms.extend([0.0] * (n_busy + len(series) - len(terms)))
        for q, t in enumerate(series):
            terms[n_busy + q] += t
    return _tabulate(terms, qmax)


############
# INTERNAL #
############

_TAIL_TOLERANCE = 1e-14


def _check_same_size(a: EdgeWeightedGraph, b: EdgeWeightedGraph) -> None:
    if a.n_servers != b.n_servers:
        raise InvalidParameterError(
            f'Cannot compare graphs on {a.n_servers} and {b.n_servers} '
            'servers.'
        )


def _check_load(rho: float) -> None:
    if rho >= 1:
        raise UnstableSystemError(f'Load ρ={rho} is not below 1.')
    if not rho > 0:
        raise InvalidParameterError(f'Load ρ={rho} is not positive.')


def _require_stable(graph: EdgeWeightedGraph, rho: float) -> None:
    report = stability(graph, SystemParams.at_load(graph.n_servers, rho))
    if not report.stable:
        raise UnstableSystemError(report.describe())


def _rational_layers(
    masks: list[int], weights: list[Fraction]
) -> Iterator[Fraction]:
    """Generate α_1, α_2, … exactly, with a sparse layer."""
    layer: dict[int, Fraction] = {0: Fraction(1)}
    edges = list(zip(masks, weights))
    while True:
        following: dict[int, Fraction] = defaultdict(Fraction)
        for subset, w in layer.items():
            for mask, p in edges:
                union = subset | mask
                following[union] += w * p / union.bit_count()
        layer = following
        yield sum(layer.values(), Fraction(0))


def _double_layers(
    masks: list[int], weights: np.ndarray, k: int
) -> Iterator[float]:
    """Generate α_1, α_2, … in double precision."""
    for layer in _dense_layers(masks, weights, k):
        yield float(layer.sum())


def _dense_layers(
    masks: list[int], weights: np.ndarray, k: int
) -> Iterator[np.ndarray]:
    """Generate layers 1, 2, … as dense arrays over all 2^k subsets.

    The multiplier 1/|S′| depends on the target subset only, so each layer
    gathers all edges first and divides once.

    """
    size = 1 << k
    subsets = np.arange(size, dtype=np.int64)
    counts = popcount(subsets)
    inverse = np.zeros(size)
    inverse[1:] = 1 / counts[1:]
    layer = np.zeros(size)
    layer[0] = 1.0
    targets = [subsets | mask for mask in masks]
    while True:
        following = np.zeros(size)
        for target, p in zip(targets, weights):
            following += np.bincount(target, weights=layer * p, minlength=size)
        layer = following * inverse
        yield layer


def _alpha_at(masks: list[int], weights: np.ndarray, k: int, q: int) -> float:
    layers = _double_layers(masks, weights, k)
    for _ in range(q - 1):
        next(layers)
    return next(layers)


def _reach(origin: np.ndarray, direction: np.ndarray) -> float:
    """Return how far one can go from origin along direction, staying ≥ 0."""
    falling = direction < 0
    if not falling.any():
        return np.inf
    return float(np.min(origin[falling] / -direction[falling]))


def _projected_gradient_norm(
    masks: list[int], weights: np.ndarray, k: int, q: int, h: float = 1e-6
) -> float:
    """Estimate the gradient of α_q by central differences.

    Project it on the tangent space of the simplex, where weights sum to 1.

    """
    gradient = np.zeros(len(weights))
    for n in range(len(weights)):
        step = np.zeros(len(weights))
        step[n] = h
        gradient[n] = (
            _alpha_at(masks, weights + step, k, q)
            - _alpha_at(masks, weights - step, k, q)
        ) / (2 * h)
    return float(np.linalg.norm(gradient - gradient.mean()))


def _death_ratios(table: AlphaTable) -> tuple[Weight, ...]:
    return tuple(
        table.alpha(q - 1) / table.alpha(q) for q in range(2, table.qmax + 1)
    )


def _selection_counts(n: int, d: int) -> list[int]:
    return [comb(i - 1, d - 1) for i in range(d, n + 1)]


@lru_cache
def _elementary_sums(n: int, d: int) -> tuple[int, ...]:
    """Return F_0 … F_J, the elementary symmetric sums of the a_i.

    These are the coefficients of Π_i(1 + a_i·t).

    """
    coefficients = [1]
    for a in _selection_counts(n, d):
        coefficients = [
            c + a * b for c, b in zip(coefficients + [0], [0] + coefficients)
        ]
    return tuple(coefficients)


def _multiplicities(
    q: int, largest: int
) -> Iterator[tuple[tuple[int, int], ...]]:
    """Generate all partitions of q into parts ≤ largest.

    Each is given as (part, multiplicity) pairs.

    """
    if q == 0:
        yield ()
        return
    if largest == 0:
        return
    for m in range(q // largest, -1, -1):
        rest = q - m * largest
        for tail in _multiplicities(rest, largest - 1):
            yield ((largest, m), *tail) if m else tail


def _partition_sum(q: int, f: tuple[int, ...]) -> int:
    total = 0
    for parts in _multiplicities(q, len(f) - 1):
        size = sum(m for _, m in parts)
        term = factorial(size)
        for j, m in parts:
            term = term * f[j] ** m // factorial(m)
        total += (-1) ** (size + q) * term
    return total


def _series(
    terms: Iterator[float], rho: float, floor: float
) -> Iterator[float]:
    """Pass on terms of a convergent series until its tail is negligible.

    The tail after a term t is bounded by t·r/(1 − r), with r the larger of
    the last term ratio and ρ. Negligible means below a tolerance relative to
    the mass summed so far plus floor.

    """
    previous = None
    mass = floor
    for n, t in enumerate(terms, start=1):
        yield t
        mass += t
        if previous:
            r = max(t / previous, rho)
            if r < 1 and t * r / (1 - r) < _TAIL_TOLERANCE * mass:
                return
        if n >= MAX_LAYERS:
            log.warning(
                'Series truncated after %d terms; the tail is not negligible.',
                n,
            )
            return
        previous = t


def _tabulate(terms: list[float], qmax: int | None) -> TabulatedDistribution:
    values = np.asarray(terms)
    total = values.sum()
    probabilities = values / total
    if qmax is None or qmax + 1 >= len(probabilities):
        return TabulatedDistribution(tuple(map(float, probabilities)))
    return TabulatedDistribution(
        tuple(map(float, probabilities[: qmax + 1])),
        float(probabilities[qmax + 1 :].sum()),
    )


def _idle_weights(
    masks: list[int], weights: np.ndarray, k: int, factor: float
) -> np.ndarray:
    """Tabulate the ALIS weight f(S) of every set S of idle servers."""
    size = 1 << k
    subsets = np.arange(size, dtype=np.int64)
    reach = np.zeros(size)
    for mask, p in zip(masks, weights):
        reach[(subsets & mask) != 0] += p
    f = np.zeros(size)
    f[0] = 1.0
    for s in range(1, size):
        rest = s
        total = 0.0
        while rest:
            low = rest & -rest
            total += f[s ^ low]
            rest ^= low
        f[s] = total / (factor * reach[s])
    return f
