"""Configuration documents, as read from JSON files, and their resolution.

A document holds what a user writes. Resolving it, with any command-line
overrides, yields the validated objects that the library works on. Documents
serialize back to JSON so that every run can echo its resolved input.

"""

from __future__ import annotations

from dataclasses import replace
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Literal, TypeVar

from pydantic import (
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    TypeAdapter,
)
from pydantic.dataclasses import dataclass as dantaclass

from redlab.data.model import (
    DesignProblem,
    EdgeWeightedGraph,
    SystemParams,
    WeightField,
)
from redlab.exc import InvalidParameterError
from redlab.graph import (
    build_complete_uniform,
    build_grid,
    build_ring,
    graph,
)
from redlab.misc import DEFAULT_SEED

_CONFIG = ConfigDict(arbitrary_types_allowed=True, extra='forbid')

Document = TypeVar('Document')

MIN_EVENTS = 1000


class Policy(str, Enum):
    """Dispatching and cancellation semantics of a simulated system."""

    COC = 'coc'  # Redundancy, cancel on completion.
    COS = 'cos'  # Redundancy, cancel on start, assign to longest idle.
    JIQ = 'jiq'  # Join the idle queue.


JiqTiebreak = Literal['uniform', 'longest_idle']


@dantaclass(frozen=True, config=_CONFIG)
class EdgeDocument:
    i: int
    j: int
    p: WeightField


@dantaclass(frozen=True, config=_CONFIG)
class GraphDocument:
    """A standard family, or explicit edges for the custom family."""

    family: Literal['complete-uniform', 'ring', 'grid', 'custom']
    n: int
    epsilon: WeightField | None = None
    edges: tuple[EdgeDocument, ...] | None = None

    def __post_init__(self):
        if self.family == 'ring' and self.epsilon is None:
            raise InvalidParameterError('epsilon: required for a ring.')
        if self.family == 'custom' and not self.edges:
            raise InvalidParameterError('edges: required for a custom graph.')

    def build(self) -> EdgeWeightedGraph:
        if self.family == 'complete-uniform':
            return build_complete_uniform(self.n)
        if self.family == 'ring':
            return build_ring(self.n, self.epsilon)
        if self.family == 'grid':
            return build_grid(self.n)
        assert self.edges is not None
        return graph(self.n, ((e.i, e.j, e.p) for e in self.edges))


@dantaclass(frozen=True, config=_CONFIG)
class SimConfig:
    """A fully resolved simulation experiment."""

    graph: EdgeWeightedGraph
    params: SystemParams
    policy: Policy = Policy.COC
    n_events: Annotated[int, Field(ge=MIN_EVENTS)] = 100_000
    n_runs: PositiveInt = 50
    seed: int = DEFAULT_SEED
    warmup_fraction: Annotated[float, Field(ge=0, lt=1)] = 0.1
    jiq_tiebreak: JiqTiebreak = 'uniform'
    allow_unstable: bool = False
    debug: bool = False  # Check state invariants after every event.

    def __post_init__(self):
        if self.graph.n_servers != self.params.n_servers:
            raise InvalidParameterError(
                f'graph: {self.graph.n_servers} servers, but n_servers is '
                f'{self.params.n_servers}.'
            )


@dantaclass(frozen=True, config=_CONFIG)
class SimDocument:
    """A simulation experiment as written in a file.

    The load is given either as rho or as the arrival rate per server.

    """

    graph: GraphDocument
    rho: NonNegativeFloat | None = None
    arrival_rate_per_server: NonNegativeFloat | None = None
    service_speed: PositiveFloat = 1.0
    policy: Policy = Policy.COC
    n_events: Annotated[int, Field(ge=MIN_EVENTS)] = 100_000
    n_runs: PositiveInt = 50
    seed: int = DEFAULT_SEED
    warmup_fraction: Annotated[float, Field(ge=0, lt=1)] = 0.1
    jiq_tiebreak: JiqTiebreak = 'uniform'
    allow_unstable: bool = False
    debug: bool = False

    def __post_init__(self):
        if (self.rho is None) == (self.arrival_rate_per_server is None):
            raise InvalidParameterError(
                'rho: give either rho or arrival_rate_per_server.'
            )

    def override(self, **changes: Any) -> SimDocument:
        """Replace fields with those changes that are not None.

        A new rho replaces any arrival rate in the file.

        """
        changes = {k: v for k, v in changes.items() if v is not None}
        if 'rho' in changes:
            changes['arrival_rate_per_server'] = None
        return replace(self, **changes)

    def resolve(self) -> SimConfig:
        graph = self.graph.build()
        if self.rho is not None:
            params = SystemParams.at_load(
                graph.n_servers, self.rho, self.service_speed
            )
        else:
            params = SystemParams(
                graph.n_servers,
                self.arrival_rate_per_server,
                self.service_speed,
            )
        return SimConfig(
            graph,
            params,
            self.policy,
            self.n_events,
            self.n_runs,
            self.seed,
            self.warmup_fraction,
            self.jiq_tiebreak,
            self.allow_unstable,
            self.debug,
        )


@dantaclass(frozen=True, config=_CONFIG)
class DesignDocument:
    """A design problem as written in a file."""

    n: int
    type_rates: tuple[PositiveFloat, ...]
    mu: PositiveFloat = 1.0
    candidate_edges: tuple[tuple[int, int], ...] | None = None

    def resolve(self) -> DesignProblem:
        return DesignProblem(
            self.n, self.type_rates, self.mu, self.candidate_edges
        )


@dantaclass(frozen=True)
class RunManifest:
    """What one command produced, from what, and how long it took."""

    subcommand: str
    config: dict[str, Any]
    seed: int | None
    version: str
    outputs: tuple[str, ...]
    wall_seconds: float
    events: int | None = None


def load(kind: type[Document], path: Path) -> Document:
    """Parse a JSON file into a document."""
    return TypeAdapter(kind).validate_json(path.read_bytes())


def dump(document: Any) -> dict[str, Any]:
    """Express a document as JSON-compatible data."""
    return TypeAdapter(type(document)).dump_python(document, mode='json')
