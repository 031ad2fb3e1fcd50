"""Artifact production: the datasets behind each CLI subcommand.

Every dataset is composed in memory as a Table and written once, at the end
of a command, together with a manifest of the run.

"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from io import StringIO
from itertools import accumulate, product
from os import replace
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import Any, Iterable, Literal

from rich import print as pprint
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress

from redlab import __version__
from redlab.alpha import (
    ArithmeticChoice,
    alpha_dp,
    bd_dominance_check,
    classical_pod_pmf,
    coc_law,
    light_traffic_ratio,
)
from redlab.closed import (
    LawName,
    coc_hetring4_pmf,
    coc_homring4_pmf,
    cos_complete4_pmf,
    cos_homring4_pmf,
    law,
    negbinom_law,
    pooled_mm1_law,
    stochastic_dominance_compare,
)
from redlab.data.config import Policy, RunManifest, SimConfig, dump
from redlab.data.model import EdgeWeightedGraph, SystemParams
from redlab.data.result import (
    DesignSolution,
    DominanceReport,
    DominanceVerdict,
)
from redlab.empirical import (
    EmpiricalDifference,
    EmpiricalDistribution,
    EmpiricalSummary,
    compare_empirical,
)
from redlab.exc import Failure, InvalidParameterError
from redlab.graph import build_complete_uniform, build_grid, build_ring
from redlab.misc import DEFAULT_SEED, number
from redlab.sim import REPORTKEY_RUN, REPORTKEY_TRACEBACK, simulate

log = logging.getLogger(__name__)

#############
# INTERFACE #
#############

Cell = float | int | Fraction | str
Family = Literal['grid', 'ring']

SIMULATION_COLUMNS = ('q', 'pmf_mean', 'pmf_ci95', 'cdf_mean', 'cdf_se')

TABLE1_ROWS = (
    ('hom. ring', Fraction(1, 2)),
    ('het. ring eps=0.7', Fraction(7, 10)),
    ('het. ring eps=0.9', Fraction(9, 10)),
)
TABLE1_COLUMNS = ((4, 2), (4, 4), (4, 10), (4, 16), (8, 2), (8, 4), (8, 10))

FIGURE2_LOAD = 0.8
FIGURE_QMAX = 25
FIGURE3_LOADS = (0.1, 0.3, 0.5, 0.7, 0.9)


@dataclass(frozen=True)
class Table:
    """One CSV file: a header and rows of numbers."""

    name: str
    header: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]

    def text(self) -> str:
        buffer = StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow(
                c if isinstance(c, str) else number(c) for c in row
            )
        return buffer.getvalue()


def alpha_table(
    graph: EdgeWeightedGraph, qmax: int, arithmetic: ArithmeticChoice
) -> Table:
    """Tabulate α_q of a graph and its ratio to the uniform complete graph."""
    uniform = build_complete_uniform(graph.n_servers)
    own = alpha_dp(graph, qmax, arithmetic)
    mode = 'rational' if own.rational else 'double'
    reference = alpha_dp(uniform, qmax, mode)
    return Table(
        'alpha',
        ('q', 'alpha', 'alpha_ratio_vs_uniform'),
        tuple(
            (q, own.alpha(q), own.alpha(q) / reference.alpha(q))
            for q in range(1, qmax + 1)
        ),
    )


def closed_form_table(
    name: LawName, rho: float, epsilon: float, qmax: int
) -> Table:
    """Tabulate a named law; the ccdf column holds ℙ{Q ≥ q}."""
    if qmax < 0:
        raise InvalidParameterError(f'qmax: must not be negative, not {qmax}.')
    dist = law(name, rho, epsilon)
    return Table(
        'closed_form',
        ('q', 'pmf', 'cdf', 'ccdf'),
        tuple(
            (q, dist.pmf(q), dist.cdf(q), dist.tail(q))
            for q in range(qmax + 1)
        ),
    )


def simulation_table(dist: EmpiricalDistribution) -> Table:
    summary = dist.summary()
    return Table(
        'simulation',
        SIMULATION_COLUMNS,
        tuple(
            (q, *values)
            for q, values in enumerate(
                zip(
                    summary.pmf_mean,
                    summary.pmf_ci95,
                    summary.cdf_mean,
                    summary.cdf_se,
                )
            )
        ),
    )


def read_summary(path: Path) -> EmpiricalSummary:
    """Parse a simulation result CSV back into a pooled summary."""
    with path.open(newline='') as f:
        reader = csv.DictReader(f)
        missing = set(SIMULATION_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise InvalidParameterError(
                f'{path}: missing column(s) {", ".join(sorted(missing))}.'
            )
        columns: dict[str, list[float]] = {c: [] for c in SIMULATION_COLUMNS}
        for line, row in enumerate(reader, start=2):
            if int(row['q']) != len(columns['q']):
                raise InvalidParameterError(
                    f'{path}, line {line}: q must count up from 0.'
                )
            try:
                for c in SIMULATION_COLUMNS:
                    columns[c].append(float(row[c]))
            except (TypeError, ValueError) as exc:
                raise InvalidParameterError(
                    f'{path}, line {line}: {exc}.'
                ) from exc
    return EmpiricalSummary(
        tuple(columns['pmf_mean']),
        tuple(columns['pmf_ci95']),
        tuple(columns['cdf_mean']),
        tuple(columns['cdf_se']),
    )


def comparison_table(difference: EmpiricalDifference) -> Table:
    """Tabulate ℙ{B ≥ q} − ℙ{A ≥ q} with standard errors."""
    return Table(
        'comparison',
        ('q', 'difference', 'se', 'ci95'),
        tuple(
            (q, d, s, c)
            for q, (d, s, c) in enumerate(
                zip(difference.difference, difference.se, difference.ci95),
                start=1,
            )
        ),
    )


def table1(arithmetic: ArithmeticChoice = 'auto') -> Table:
    """Tabulate α_q(complete)/α_q(ring), the light-traffic tail ratios.

    Rows are rings by ε; columns are pairs (N, q).

    """
    complete = {n: build_complete_uniform(n) for n, _ in TABLE1_COLUMNS}
    rows = []
    for label, epsilon in TABLE1_ROWS:
        cells: list[Cell] = [label]
        for n, q in TABLE1_COLUMNS:
            ring = build_ring(n, epsilon)
            cells.append(
                light_traffic_ratio(complete[n], ring, q, arithmetic)
            )
        rows.append(tuple(cells))
    return Table(
        'table1',
        ('graph', *(f'N={n} q={q}' for n, q in TABLE1_COLUMNS)),
        tuple(rows),
    )


def figure2(rho: float = FIGURE2_LOAD, qmax: int = FIGURE_QMAX) -> Table:
    """Tabulate ℙ{Q ≥ q} of six laws on four servers, as in a tail plot."""
    classical = classical_pod_pmf(4, 2, rho, qmax)
    classical_tail = [1 - c for c in accumulate(classical.pmf, initial=0.0)]
    laws = (
        coc_homring4_pmf(rho),
        coc_hetring4_pmf(rho, 0.7),
        coc_hetring4_pmf(rho, 0.9),
        negbinom_law(rho),
    )
    pooled = pooled_mm1_law(rho)
    return Table(
        'figure2',
        (
            'q',
            'pooled_d4',
            'classical_d2',
            'hom_ring',
            'het_ring_0.7',
            'het_ring_0.9',
            'negbinom',
        ),
        tuple(
            (q, pooled.tail(q), classical_tail[q], *(d.tail(q) for d in laws))
            for q in range(qmax + 1)
        ),
    )


def figure3(
    loads: Iterable[float] = FIGURE3_LOADS,
    qmax: int = FIGURE_QMAX,
    n_events: int = 100_000,
    n_runs: int = 50,
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
) -> tuple[Table, Table]:
    """Tabulate ℙ{Q_ring ≥ q} − ℙ{Q_complete ≥ q} on four servers.

    The first table is exact, under cancel-on-start with ALIS. The second is
    simulated, under join-the-idle-queue, with 95% half-widths.

    """
    loads = tuple(loads)
    rows = []
    for rho in loads:
        ring, complete = cos_homring4_pmf(rho), cos_complete4_pmf(rho)
        rows.extend(
            (rho, q, ring.tail(q) - complete.tail(q))
            for q in range(1, qmax + 1)
        )
    exact = Table('figure3_cos', ('rho', 'q', 'difference'), tuple(rows))
    differences = _simulated_differences(
        build_ring(4, Fraction(1, 2)),
        loads,
        Policy.JIQ,
        n_events,
        n_runs,
        seed,
        workers,
        qmax,
    )
    simulated = Table(
        'figure3_jiq',
        ('rho', 'q', 'difference', 'ci95'),
        tuple(
            (rho, q, d, c)
            for rho, difference in differences.items()
            for q, (d, c) in enumerate(
                zip(difference.difference, difference.ci95), start=1
            )
        ),
    )
    return exact, simulated


def trend(
    family: Family,
    n: int,
    loads: Iterable[float],
    policy: Policy = Policy.COC,
    n_events: int = 100_000,
    n_runs: int = 50,
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
) -> Table:
    """Tabulate simulated ℙ{Q_family ≥ q} − ℙ{Q_complete ≥ q}.

    The family graph is a toroidal grid or a homogeneous ring on n servers.

    """
    if family == 'grid':
        graph = build_grid(n)
    else:
        graph = build_ring(n, Fraction(1, 2))
    differences = _simulated_differences(
        graph, tuple(loads), policy, n_events, n_runs, seed, workers
    )
    return Table(
        f'trend_{family}{n}',
        ('rho', 'q', 'difference', 'se'),
        tuple(
            (rho, q, d, s)
            for rho, difference in differences.items()
            for q, (d, s) in enumerate(
                zip(difference.difference, difference.se), start=1
            )
        ),
    )


def dominance(
    graph_a: EdgeWeightedGraph,
    graph_b: EdgeWeightedGraph,
    rho: float,
    qmax: int,
    arithmetic: ArithmeticChoice = 'auto',
) -> tuple[Table, DominanceReport, DominanceVerdict]:
    """Check Q(A) ≤st Q(B) two ways under cancel-on-completion.

    The birth–death ratio condition is sufficient at every load. The tail
    margins are exact at the given load.

    """
    report = bd_dominance_check(graph_a, graph_b, qmax, arithmetic)
    law_a = coc_law(graph_a, rho)
    law_b = coc_law(graph_b, rho)
    verdict = stochastic_dominance_compare(law_a, law_b, qmax)
    rows = []
    for q in range(1, qmax + 1):
        ratios: tuple[Cell, Cell] = ('', '')
        if q >= 2:
            ratios = (report.ratios_a[q - 2], report.ratios_b[q - 2])
        rows.append(
            (q, *ratios, law_a.tail(q), law_b.tail(q), verdict.margins[q - 1])
        )
    table = Table(
        'dominance',
        ('q', 'death_ratio_a', 'death_ratio_b', 'tail_a', 'tail_b', 'margin'),
        tuple(rows),
    )
    return table, report, verdict


def design_document(solution: DesignSolution) -> dict[str, Any]:
    """Express a design solution as JSON-compatible data."""
    report = solution.stability
    violating = report.violating_edges
    return {
        'status': solution.status,
        'assignment': [list(pair) for pair in solution.assignment.pairs],
        'probabilities': [
            {'i': e.i, 'j': e.j, 'p': float(e.p)}
            for e in solution.graph.edges
        ],
        'alpha2': solution.alpha2,
        'alpha3': solution.alpha3,
        'alpha4': solution.alpha4,
        'evaluated': solution.evaluated,
        'stability': {
            'stable': report.stable,
            'slack': report.slack,
            'method': report.method,
            'partial': report.partial,
            'violating_edges': (
                None
                if violating is None
                else [list(e.pair) for e in violating]
            ),
            'violating_arrival_rate': report.violating_arrival_rate,
            'violating_service_rate': report.violating_service_rate,
            'description': report.describe(),
        },
    }


def simulate_all(
    configs: dict[Any, SimConfig], workers: int | None = None
) -> dict[Any, EmpiricalDistribution]:
    """Simulate several configurations with one progress bar each."""
    results = {}
    with Progress(console=_STDERR, transient=True) as progress:
        for key, config in configs.items():
            task = progress.add_task(
                _label(key, config), total=config.n_runs
            )
            results[key] = simulate(
                config,
                lambda _, task=task: progress.update(task, advance=1),
                workers,
            )
    return results


def write(
    out: Path,
    subcommand: str,
    config: Any,
    seed: int | None,
    started: float,
    finished: float,
    tables: Iterable[Table] = (),
    documents: dict[str, Any] | None = None,
    events: int | None = None,
) -> RunManifest:
    """Write tables, JSON documents and one manifest into a directory.

    Each file is written to a temporary sibling and renamed into place, so
    readers never see a partial file.

    """
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []
    for table in tables:
        outputs.append(_write_atomic(out / f'{table.name}.csv', table.text()))
    for name, document in (documents or {}).items():
        outputs.append(
            _write_atomic(out / f'{name}.json', _json_text(document))
        )
    manifest = RunManifest(
        subcommand,
        config if isinstance(config, dict) else dump(config),
        seed,
        __version__,
        tuple(outputs),
        round(finished - started, 6),
        events,
    )
    _write_atomic(
        out / f'{subcommand}.manifest.json', _json_text(dump(manifest))
    )
    return manifest


def fail(e: Failure) -> None:
    """Display information about a failed replication."""
    _STDERR.print(f'[bold red]Error:[/bold red] {e}')
    if REPORTKEY_RUN in e.description:
        _STDERR.print(f'Replication: {e.description[REPORTKEY_RUN]}')
    if REPORTKEY_TRACEBACK in e.description:
        # This will start with a line like “Traceback (most recent call last):”
        _STDERR.print(Panel.fit(e.description[REPORTKEY_TRACEBACK].rstrip()))


def show(table: Table, digits: int = 4) -> None:
    """Print a table to the terminal at reduced precision."""
    for row in (table.header, *table.rows):
        pprint(
            '  '.join(
                c if isinstance(c, str) else _short(c, digits) for c in row
            )
        )


############
# INTERNAL #
############

_STDERR = Console(stderr=True)


def _simulated_differences(
    graph: EdgeWeightedGraph,
    loads: tuple[float, ...],
    policy: Policy,
    n_events: int,
    n_runs: int,
    seed: int,
    workers: int | None,
    qmax: int | None = None,
) -> dict[float, EmpiricalDifference]:
    """Simulate a graph against the uniform complete graph at each load.

    Simulation k, in order of load with the graph before its reference, is
    seeded with seed + k so that the two sides are independent.

    """
    n = graph.n_servers
    reference = build_complete_uniform(n)
    configs = {}
    for k, (rho, (side, g)) in enumerate(
        product(loads, (('graph', graph), ('complete', reference)))
    ):
        configs[(rho, side)] = SimConfig(
            g,
            SystemParams.at_load(n, rho),
            policy,
            n_events,
            n_runs,
            seed + k,
        )
    results = simulate_all(configs, workers)
    return {
        rho: compare_empirical(
            results[(rho, 'complete')], results[(rho, 'graph')], qmax
        )
        for rho in loads
    }


def _label(key: Any, config: SimConfig) -> str:
    parts = key if isinstance(key, tuple) else (key,)
    return ' '.join([config.policy.value, *(str(p) for p in parts)])


def _short(value: Cell, digits: int) -> str:
    if isinstance(value, int):
        return str(value)
    return f'{float(value):.{digits}f}'


def _json_text(document: Any) -> str:
    return json.dumps(document, indent=2, ensure_ascii=False) + '\n'


def _write_atomic(path: Path, text: str) -> str:
    with NamedTemporaryFile(
        'w',
        encoding='utf-8',
        dir=path.parent,
        prefix=f'.{path.name}.',
        delete=False,
    ) as f:
        f.write(text)
    replace(f.name, path)
    log.debug('Wrote %s.', path)
    return str(path)
