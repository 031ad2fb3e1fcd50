"""Domain model of edge-weighted compatibility graphs.

These types are immutable and validated on construction, with automatic
parsing by Pydantic. Server ids are 1-based; internally, a set of servers is
a bitmask where server i is bit i − 1.

Edge weights are either exact rationals (fractions.Fraction) or doubles. A
graph whose weights are all rational is exact and sums to one exactly.

"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Annotated

from pydantic import ConfigDict, Field, NonNegativeFloat, PositiveFloat
from pydantic.dataclasses import dataclass as dantaclass
from pydantic.functional_serializers import PlainSerializer
from pydantic.functional_validators import PlainValidator

from redlab.data.util import Weight, exact, pair_mask, unweight, weight
from redlab.exc import InvalidParameterError
from redlab.misc import WEIGHT_SUM_TOLERANCE

_CONFIG = ConfigDict(arbitrary_types_allowed=True)

# Exact weights serialize as strings like “1/4”, which parse back exactly.
WeightField = Annotated[
    Fraction | float, PlainValidator(weight), PlainSerializer(unweight)
]


@dantaclass(frozen=True)
class SystemParams:
    """Number of servers N, arrival rate λ per server and service speed μ."""

    n_servers: Annotated[int, Field(ge=2)]
    arrival_rate_per_server: NonNegativeFloat
    service_speed: PositiveFloat = 1.0

    @property
    def load(self) -> float:
        """Return ρ = λ/μ."""
        return self.arrival_rate_per_server / self.service_speed

    @property
    def total_arrival_rate(self) -> float:
        return self.n_servers * self.arrival_rate_per_server

    @classmethod
    def at_load(
        cls, n_servers: int, rho: float, service_speed: float = 1.0
    ) -> SystemParams:
        return cls(n_servers, rho * service_speed, service_speed)


@dantaclass(frozen=True, config=_CONFIG)
class Edge:
    """A server pair {i, j} with its selection probability p."""

    i: Annotated[int, Field(ge=1)]
    j: Annotated[int, Field(ge=1)]
    p: WeightField

    @property
    def mask(self) -> int:
        return pair_mask(self.i, self.j)

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j)


@dantaclass(frozen=True, config=_CONFIG)
class EdgeWeightedGraph:
    """Servers plus the selection probabilities of their pairs.

    Only edges with positive weight are stored. Each edge is listed once, with
    its lower server id first.

    """

    n_servers: Annotated[int, Field(ge=2)]
    edges: tuple[Edge, ...]
    name: str = 'custom'

    def __post_init__(self):
        if not self.edges:
            raise InvalidParameterError('A graph needs at least one edge.')
        seen: set[tuple[int, int]] = set()
        for n, e in enumerate(self.edges, start=1):
            where = f'Edge {n} {{{e.i}, {e.j}}}'
            if e.i > self.n_servers or e.j > self.n_servers:
                raise InvalidParameterError(
                    f'{where}: server ids must lie in 1..{self.n_servers}.'
                )
            if e.i == e.j:
                raise InvalidParameterError(f'{where}: a loop is not a pair.')
            if e.i > e.j:
                raise InvalidParameterError(
                    f'{where}: list the lower server id first.'
                )
            if e.pair in seen:
                raise InvalidParameterError(f'{where}: duplicate pair.')
            if not e.p > 0:
                raise InvalidParameterError(
                    f'{where}: weight {e.p} is not positive.'
                )
            seen.add(e.pair)

        total = sum(self.weights)
        if self.exact:
            if total != 1:
                raise InvalidParameterError(
                    f'Edge weights sum to {total}, not 1.'
                )
        elif abs(total - 1) > WEIGHT_SUM_TOLERANCE:
            raise InvalidParameterError(
                f'Edge weights sum to {float(total)!r}, not 1.'
            )

    @cached_property
    def weights(self) -> tuple[Weight, ...]:
        return tuple(e.p for e in self.edges)

    @cached_property
    def masks(self) -> tuple[int, ...]:
        return tuple(e.mask for e in self.edges)

    @cached_property
    def exact(self) -> bool:
        """Return True if all weights are exact rationals."""
        return exact(self.weights)

    @cached_property
    def covered(self) -> int:
        """Return the bitmask of servers touched by any edge."""
        m = 0
        for mask in self.masks:
            m |= mask
        return m

    def weight_of(self, i: int, j: int) -> Weight:
        """Return the weight of pair {i, j}, zero if absent."""
        key = (min(i, j), max(i, j))
        for e in self.edges:
            if e.pair == key:
                return e.p
        return Fraction(0) if self.exact else 0.0


@dataclass(frozen=True)
class StabilityReport:
    """The outcome of a stability scan over subsets of edges.

    Slack is the minimum over checked subsets S of the aggregate service rate
    of the endpoints of S less the aggregate arrival rate of S. A partial
    report rests only on the necessary condition λ < μ.

    """

    stable: bool
    slack: float
    violating_edges: tuple[Edge, ...] | None = None
    violating_arrival_rate: float | None = None
    violating_service_rate: float | None = None
    method: str = 'edges'
    partial: bool = False

    def __post_init__(self):
        if self.stable == (self.violating_edges is not None):
            raise InvalidParameterError(
                'A stability report names a violating subset if and only if '
                'it is unstable.'
            )

    def describe(self) -> str:
        if self.stable:
            s = f'Stable with slack {self.slack:.6g}'
            if self.partial:
                s += ' (necessary condition only)'
            return s + '.'
        assert self.violating_edges is not None
        pairs = ', '.join(f'{{{e.i}, {e.j}}}' for e in self.violating_edges)
        return (
            f'Unstable: edges {pairs} carry arrival rate '
            f'{self.violating_arrival_rate:.6g} against service rate '
            f'{self.violating_service_rate:.6g}.'
        )


@dantaclass(frozen=True)
class DesignProblem:
    """Job types with their arrival rates, to be mapped onto server pairs.

    Without candidate edges, every pair of servers is admissible.

    """

    n_servers: Annotated[int, Field(ge=2)]
    type_rates: tuple[PositiveFloat, ...]
    service_speed: PositiveFloat = 1.0
    candidate_edges: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if not self.type_rates:
            raise InvalidParameterError(
                'type_rates: a design problem needs at least one job type.'
            )
        if self.candidate_edges is None:
            return
        if not self.candidate_edges:
            raise InvalidParameterError(
                'candidate_edges: at least one pair must be admissible.'
            )
        seen: set[tuple[int, int]] = set()
        for n, (i, j) in enumerate(self.candidate_edges, start=1):
            where = f'candidate_edges: pair {n} {{{i}, {j}}}'
            if not (1 <= i <= self.n_servers and 1 <= j <= self.n_servers):
                raise InvalidParameterError(
                    f'{where}: server ids must lie in 1..{self.n_servers}.'
                )
            if i == j:
                raise InvalidParameterError(f'{where}: a loop is not a pair.')
            key = (min(i, j), max(i, j))
            if key in seen:
                raise InvalidParameterError(f'{where}: duplicate pair.')
            seen.add(key)

    @property
    def n_types(self) -> int:
        return len(self.type_rates)

    @property
    def total_rate(self) -> float:
        """Return Nλ, the sum of all type rates."""
        return sum(self.type_rates)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Return admissible pairs, lower server id first."""
        if self.candidate_edges is None:
            return tuple(
                (i, j)
                for i in range(1, self.n_servers + 1)
                for j in range(i + 1, self.n_servers + 1)
            )
        return tuple((min(i, j), max(i, j)) for i, j in self.candidate_edges)

    @property
    def params(self) -> SystemParams:
        return SystemParams(
            self.n_servers,
            self.total_rate / self.n_servers,
            self.service_speed,
        )


@dantaclass(frozen=True)
class Assignment:
    """A server pair for each job type, in order of type."""

    pairs: tuple[tuple[int, int], ...]

    def describe(self) -> str:
        return ', '.join(
            f'type {k} → {{{i}, {j}}}'
            for k, (i, j) in enumerate(self.pairs, start=1)
        )
