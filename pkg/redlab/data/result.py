"""Results of analytic computations.

These are plain frozen dataclasses. They are produced by the library, not
parsed from user input, so they skip validation beyond a few invariants.

"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

from redlab.data.model import Assignment, EdgeWeightedGraph, StabilityReport
from redlab.data.util import Weight
from redlab.exc import InvalidParameterError


@dataclass(frozen=True)
class AlphaTable:
    """Coverage polynomials α_1 … α_qmax of one graph."""

    graph_id: str
    values: tuple[Weight, ...]
    rational: bool = False

    def __post_init__(self):
        if not self.values:
            raise InvalidParameterError('An alpha table needs qmax ≥ 1.')

    @property
    def qmax(self) -> int:
        return len(self.values)

    def alpha(self, q: int) -> Weight:
        """Return α_q, with α_0 = 1."""
        if q == 0:
            return Fraction(1) if self.rational else 1.0
        return self.values[q - 1]


@dataclass(frozen=True)
class DominanceReport:
    """The birth–death ratio condition α_{q−1}/α_q checked up to qmax."""

    qmax: int
    holds: bool
    first_violation: int | None
    ratios_a: tuple[Weight, ...]  # Index 0 is q = 2.
    ratios_b: tuple[Weight, ...]


@dataclass(frozen=True)
class DominanceVerdict:
    """Tail comparison of two laws: margin(q) = ℙ{B ≥ q} − ℙ{A ≥ q}."""

    qmax: int
    tol: float
    holds: bool
    margins: tuple[float, ...]  # Index 0 is q = 1.

    @property
    def first_violation(self) -> int | None:
        for q, margin in enumerate(self.margins, start=1):
            if margin < -self.tol:
                return q
        return None


@dataclass(frozen=True)
class ProbeReport:
    """Random perturbations of uniform weights on a complete graph."""

    n_servers: int
    q: int
    step: float
    alpha_uniform: float
    differences: tuple[float, ...]  # One per trial, the lesser of ±step.
    gradient_norm: float
    rescaled: tuple[int, ...]  # Trials cut short at the simplex boundary.

    @property
    def min_difference(self) -> float:
        return min(self.differences, default=0.0)


@dataclass(frozen=True)
class ClassicalPodLaw:
    """The classical power-of-d law of the total number of jobs.

    counts[q] is the exact integer coefficient of the ratio
    ℙ{Q = q}/ℙ{Q = 0} = counts[q]·(ρ/C(N−1, d−1))^q.

    """

    n_servers: int
    d: int
    rho: float
    counts: tuple[int, ...]
    ratios: tuple[float, ...]
    empty_prob: float

    @property
    def pmf(self) -> tuple[float, ...]:
        return tuple(self.empty_prob * r for r in self.ratios)


@dataclass(frozen=True)
class DesignSolution:
    """The outcome of a design search.

    For an infeasible problem, the assignment is a witness: the candidate
    whose stability report comes closest to stable.

    """

    status: Literal['optimal', 'infeasible', 'heuristic']
    assignment: Assignment
    graph: EdgeWeightedGraph
    alpha2: float
    stability: StabilityReport
    alpha3: float | None = None
    alpha4: float | None = None
    evaluated: int = 0
