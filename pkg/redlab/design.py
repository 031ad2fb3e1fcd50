"""Assignment of job types to server pairs.

Each of K job types goes to exactly one admissible pair. The induced edge
selection probabilities are the rate shares of the pairs, and the best
design minimizes α_2, the leading light-traffic term, among stable ones.

"""

import logging
from itertools import product
from typing import Iterable

import numpy as np
from more_itertools import sliced

from redlab.alpha import alpha_dp
from redlab.data.model import (
    Assignment,
    DesignProblem,
    EdgeWeightedGraph,
    StabilityReport,
    SystemParams,
)
from redlab.data.result import DesignSolution
from redlab.exc import InvalidParameterError
from redlab.graph import graph, stability

log = logging.getLogger(__name__)

#############
# INTERFACE #
#############

MAX_ASSIGNMENTS = 10**7
TIE_TOLERANCE = 1e-12


def induced_probabilities(
    problem: DesignProblem, assignment: Assignment
) -> EdgeWeightedGraph:
    """Return the graph with p_e = Σ_k λ_k·x_{e,k}/Nλ."""
    _check_assignment(problem, assignment)
    return _graph(problem, _rates(problem, _indices(problem, assignment)))


def feasible(
    problem: DesignProblem,
    assignment: Assignment,
    params: SystemParams | None = None,
) -> tuple[bool, StabilityReport | None]:
    """Check that an assignment is total and yields a stable system.

    The arrival rate per server is Σλ_k/N whatever params say; params
    contribute the service speed. An assignment that is not a total map into
    the admissible pairs is infeasible without a stability report.

    """
    if params is not None and params.n_servers != problem.n_servers:
        raise InvalidParameterError(
            f'Problem has {problem.n_servers} servers but parameters have '
            f'n_servers={params.n_servers}.'
        )
    try:
        _check_assignment(problem, assignment)
    except InvalidParameterError as exc:
        log.debug('%s', exc)
        return False, None
    mu = problem.service_speed if params is None else params.service_speed
    report = _stability(
        problem, _rates(problem, _indices(problem, assignment)), mu
    )
    return report.stable, report


def alpha2(probabilities: np.ndarray, union_sizes: np.ndarray) -> float:
    """Return α_2 = Σ_{e,f} p_e·p_f/(2|e ∪ f|) over ordered edge pairs."""
    return float(probabilities @ _pair_factors(union_sizes) @ probabilities)


def optimize(problem: DesignProblem) -> DesignSolution:
    """Find the stable assignment with the least α_2.

    Up to MAX_ASSIGNMENTS candidates, search exhaustively. Ties within
    TIE_TOLERANCE go to the lexicographically smallest assignment, comparing
    the pair index of type 1 first. Beyond the budget, fall back on a greedy
    construction with local search.

    """
    edges = problem.edges
    n_candidates = len(edges) ** problem.n_types
    if n_candidates <= MAX_ASSIGNMENTS:
        solution = _exhaustive(problem)
    else:
        log.warning(
            '%d assignments exceed the budget of %d; searching greedily.',
            n_candidates,
            MAX_ASSIGNMENTS,
        )
        solution = _heuristic(problem)
    return solution


############
# INTERNAL #
############

_CHUNK = 1 << 16


def _check_assignment(problem: DesignProblem, assignment: Assignment) -> None:
    if len(assignment.pairs) != problem.n_types:
        raise InvalidParameterError(
            f'Assignment covers {len(assignment.pairs)} types, '
            f'not {problem.n_types}.'
        )
    admissible = set(problem.edges)
    for k, (i, j) in enumerate(assignment.pairs, start=1):
        if (min(i, j), max(i, j)) not in admissible:
            raise InvalidParameterError(
                f'Type {k}: pair {{{i}, {j}}} is not admissible.'
            )


def _indices(problem: DesignProblem, assignment: Assignment) -> list[int]:
    index = {pair: n for n, pair in enumerate(problem.edges)}
    return [index[(min(i, j), max(i, j))] for i, j in assignment.pairs]


def _assignment(problem: DesignProblem, indices: Iterable[int]) -> Assignment:
    edges = problem.edges
    return Assignment(tuple(edges[int(n)] for n in indices))


def _rates(problem: DesignProblem, indices: list[int]) -> np.ndarray:
    """Sum type rates per admissible pair."""
    rates = np.zeros(len(problem.edges))
    for k, n in enumerate(indices):
        rates[n] += problem.type_rates[k]
    return rates


def _graph(problem: DesignProblem, rates: np.ndarray) -> EdgeWeightedGraph:
    total = rates.sum()
    return graph(
        problem.n_servers,
        (
            (i, j, float(r / total))
            for (i, j), r in zip(problem.edges, rates)
            if r > 0
        ),
        'design',
    )


def _stability(
    problem: DesignProblem, rates: np.ndarray, mu: float | None = None
) -> StabilityReport:
    params = SystemParams(
        problem.n_servers,
        rates.sum() / problem.n_servers,
        problem.service_speed if mu is None else mu,
    )
    return stability(_graph(problem, rates), params)


def _union_sizes(problem: DesignProblem) -> np.ndarray:
    edges = problem.edges
    return np.array([[len({*e, *f}) for f in edges] for e in edges])


def _pair_factors(union_sizes: np.ndarray) -> np.ndarray:
    return 1 / (2 * union_sizes)


def _exhaustive(problem: DesignProblem) -> DesignSolution:
    """Rank all assignments by α_2, then test stability in that order.

    Two necessary conditions screen candidates cheaply: no single pair may
    carry 2μ or more, and the total must stay below Nμ.

    """
    m = len(problem.edges)
    k = problem.n_types
    rates = np.asarray(problem.type_rates)
    total = rates.sum()
    mu = problem.service_speed
    factors = _pair_factors(_union_sizes(problem))
    shape = (m,) * k
    n_candidates = m**k

    objective = np.empty(n_candidates)
    screen = np.empty(n_candidates)
    for chunk in sliced(range(n_candidates), _CHUNK):
        index = np.arange(chunk.start, chunk.stop)
        chosen = np.stack(np.unravel_index(index, shape), axis=1)
        loads = np.zeros((len(index), m))
        rows = np.repeat(np.arange(len(index)), k)
        np.add.at(loads, (rows, chosen.ravel()), np.tile(rates, len(index)))
        p = loads / total
        objective[chunk.start : chunk.stop] = np.einsum(
            'ce,ef,cf->c', p, factors, p
        )
        screen[chunk.start : chunk.stop] = np.minimum(
            2 * mu - loads.max(axis=1), problem.n_servers * mu - total
        )

    # Stable sort on rounded values keeps index order among ties.
    order = np.argsort(np.round(objective / TIE_TOLERANCE), kind='stable')
    witness: tuple[int, StabilityReport] | None = None
    evaluated = 0
    for candidate in order:
        if screen[candidate] <= 0:
            continue
        evaluated += 1
        indices = np.unravel_index(candidate, shape)
        report = _stability(problem, _rates(problem, list(indices)))
        if report.stable:
            return _solution(
                problem, 'optimal', list(indices), report, evaluated
            )
        if witness is None or report.slack > witness[1].slack:
            witness = (int(candidate), report)

    if witness is None:
        # Nothing passed the screen; the least screened violation stands in.
        best = int(np.argmax(screen))
        indices = np.unravel_index(best, shape)
        report = _stability(problem, _rates(problem, list(indices)))
        witness = (best, report)
    indices = np.unravel_index(witness[0], shape)
    return _solution(
        problem, 'infeasible', list(indices), witness[1], n_candidates
    )


def _heuristic(problem: DesignProblem) -> DesignSolution:
    """Place types greedily by decreasing rate, then reassign one at a time.

    A move is taken when it turns an unstable design stable or lowers α_2 of
    a stable one; passes repeat until no move helps.

    """
    m = len(problem.edges)
    factors = _pair_factors(_union_sizes(problem))
    rates = problem.type_rates
    placed = [0] * problem.n_types
    loads = np.zeros(m)
    for k in sorted(range(problem.n_types), key=lambda k: -rates[k]):
        best = None
        for n in range(m):
            loads[n] += rates[k]
            value = float(loads @ factors @ loads)
            loads[n] -= rates[k]
            if best is None or value < best[0] - TIE_TOLERANCE:
                best = (value, n)
        assert best is not None
        placed[k] = best[1]
        loads[best[1]] += rates[k]

    union_sizes = _union_sizes(problem)

    def score(indices: list[int]) -> tuple[bool, float, StabilityReport]:
        r = _rates(problem, indices)
        report = _stability(problem, r)
        return report.stable, alpha2(r / r.sum(), union_sizes), report

    stable, value, report = score(placed)
    evaluated = 1
    improved = True
    while improved:
        improved = False
        for k, n in product(range(problem.n_types), range(m)):
            if placed[k] == n:
                continue
            trial = placed.copy()
            trial[k] = n
            outcome = score(trial)
            evaluated += 1
            if (outcome[0] and not stable) or (
                outcome[0] == stable and outcome[1] < value - TIE_TOLERANCE
            ):
                placed = trial
                stable, value, report = outcome
                improved = True

    if not stable:
        log.warning('Local search found no stable design; not proven.')
    status = 'heuristic' if stable else 'infeasible'
    return _solution(problem, status, placed, report, evaluated)


def _solution(
    problem: DesignProblem,
    status: str,
    indices: list[int],
    report: StabilityReport,
    evaluated: int,
) -> DesignSolution:
    indices = [int(n) for n in indices]
    rates = _rates(problem, indices)
    g = _graph(problem, rates)
    table = alpha_dp(g, 4, 'double')
    return DesignSolution(
        status,  # type: ignore[arg-type]
        _assignment(problem, indices),
        g,
        float(table.alpha(2)),
        report,
        float(table.alpha(3)),
        float(table.alpha(4)),
        evaluated,
    )
