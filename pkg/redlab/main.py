"""Logic for the use of redlab as a CLI application.

Every command composes its datasets first and writes them, with one run
manifest, only when all of them are complete.

"""

import logging
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from time import perf_counter
from typing import Iterator, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from typer import Argument, Exit, Option, Typer

from redlab import __version__ as _version
from redlab import app as artifacts
from redlab.data.config import (
    DesignDocument,
    GraphDocument,
    Policy,
    SimDocument,
    dump,
    load,
)
from redlab.design import optimize
from redlab.empirical import compare_empirical
from redlab.exc import (
    Failure,
    InfeasibleError,
    RedlabError,
    UnstableSystemError,
)
from redlab.misc import DEFAULT_SEED

app = Typer(context_settings={'help_option_names': ['-h', '--help']})

EXIT_INVALID = 2
EXIT_UNSTABLE = 3

_STDERR = Console(stderr=True)

_OUT = Option(Path('out'), help='Directory for output files.')


class Arithmetic(str, Enum):
    AUTO = 'auto'
    RATIONAL = 'rational'
    DOUBLE = 'double'


class LawChoice(str, Enum):
    COC_COMPLETE4 = 'coc-complete4'
    COC_HETRING4 = 'coc-hetring4'
    COC_HOMRING4 = 'coc-homring4'
    COS_COMPLETE4 = 'cos-complete4'
    COS_HOMRING4 = 'cos-homring4'
    NEGBINOM = 'negbinom'
    POOLED_MM1 = 'pooled-mm1'


class FamilyChoice(str, Enum):
    GRID = 'grid'
    RING = 'ring'


@app.callback()
def main(
    verbose: bool = Option(
        False, '--verbose', '-v', help='Log debugging information.'
    ),
):
    """Compute and simulate weighted power-of-two redundancy systems."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format='%(message)s',
        handlers=[RichHandler(console=_STDERR, show_path=False)],
        force=True,
    )


@app.command()
def version():
    """Print the version ID of redlab."""
    print(f'redlab {_version}')


@app.command()
def alpha(
    config: Path = Option(..., help='Graph document (JSON).'),
    qmax: int = Option(16, help='Highest q.'),
    arithmetic: Arithmetic = Option(Arithmetic.AUTO, help='Number type.'),
    out: Path = _OUT,
):
    """Tabulate coverage polynomials α_q of a graph."""
    started = perf_counter()
    with _guard():
        document = load(GraphDocument, config)
        table = artifacts.alpha_table(
            document.build(), qmax, arithmetic.value
        )
        artifacts.write(
            out,
            'alpha',
            {
                'graph': dump(document),
                'qmax': qmax,
                'arithmetic': arithmetic.value,
            },
            None,
            started,
            perf_counter(),
            (table,),
        )


@app.command()
def closed_form(
    law: LawChoice = Option(..., help='Name of the law.'),
    rho: float = Option(..., help='Load per server, in (0, 1).'),
    epsilon: float = Option(0.5, help='Ring parameter, in (0, 1).'),
    qmax: int = Option(25, help='Highest q.'),
    out: Path = _OUT,
):
    """Tabulate an explicit law: pmf, cdf and ℙ{Q ≥ q} as ccdf."""
    started = perf_counter()
    with _guard():
        table = artifacts.closed_form_table(law.value, rho, epsilon, qmax)
        artifacts.write(
            out,
            'closed-form',
            {'law': law.value, 'rho': rho, 'epsilon': epsilon, 'qmax': qmax},
            None,
            started,
            perf_counter(),
            (table,),
        )


@app.command()
def simulate(
    config: Path = Option(..., help='Simulation document (JSON).'),
    rho: Optional[float] = Option(None, help='Override the load.'),
    events: Optional[int] = Option(None, help='Override events per run.'),
    runs: Optional[int] = Option(None, help='Override replications.'),
    seed: Optional[int] = Option(None, help='Override the seed.'),
    policy: Optional[Policy] = Option(None, help='Override the policy.'),
    out: Path = _OUT,
):
    """Simulate a system and tabulate its pooled queue-length law."""
    started = perf_counter()
    with _guard():
        document = load(SimDocument, config).override(
            rho=rho, n_events=events, n_runs=runs, seed=seed, policy=policy
        )
        resolved = document.resolve()
        results = artifacts.simulate_all({'simulation': resolved})
        dist = results['simulation']
        artifacts.write(
            out,
            'simulate',
            dump(document),
            resolved.seed,
            started,
            perf_counter(),
            (artifacts.simulation_table(dist),),
            events=dist.events,
        )


@app.command()
def compare(
    result_a: Path = Argument(..., exists=True, help='Simulation CSV for A.'),
    result_b: Path = Argument(..., exists=True, help='Simulation CSV for B.'),
    qmax: Optional[int] = Option(None, help='Highest q; default is common.'),
    out: Path = _OUT,
):
    """Tabulate ℙ{B ≥ q} − ℙ{A ≥ q} from two simulation results."""
    started = perf_counter()
    with _guard():
        difference = compare_empirical(
            artifacts.read_summary(result_a),
            artifacts.read_summary(result_b),
            qmax,
        )
        artifacts.write(
            out,
            'compare',
            {'a': str(result_a), 'b': str(result_b), 'qmax': qmax},
            None,
            started,
            perf_counter(),
            (artifacts.comparison_table(difference),),
        )


@app.command()
def design_opt(
    config: Path = Option(..., help='Design problem (JSON).'),
    out: Path = _OUT,
):
    """Assign job types to server pairs, minimizing α_2 among stable ones."""
    started = perf_counter()
    with _guard():
        document = load(DesignDocument, config)
        solution = optimize(document.resolve())
        artifacts.write(
            out,
            'design-opt',
            dump(document),
            None,
            started,
            perf_counter(),
            documents={'design': artifacts.design_document(solution)},
        )
        print(f'{solution.status}: {solution.assignment.describe()}')
        if solution.status == 'infeasible':
            raise InfeasibleError(
                'No assignment is stable; '
                + solution.stability.describe()
            )


@app.command()
def table1(
    arithmetic: Arithmetic = Option(Arithmetic.AUTO, help='Number type.'),
    out: Path = _OUT,
):
    """Tabulate light-traffic tail ratios of rings against complete graphs."""
    started = perf_counter()
    with _guard():
        table = artifacts.table1(arithmetic.value)
        artifacts.write(
            out,
            'table1',
            {'arithmetic': arithmetic.value},
            None,
            started,
            perf_counter(),
            (table,),
        )
        artifacts.show(table)


@app.command()
def figure2(
    rho: float = Option(artifacts.FIGURE2_LOAD, help='Load per server.'),
    qmax: int = Option(artifacts.FIGURE_QMAX, help='Highest q.'),
    out: Path = _OUT,
):
    """Tabulate ℙ{Q ≥ q} of six laws on four servers."""
    started = perf_counter()
    with _guard():
        table = artifacts.figure2(rho, qmax)
        artifacts.write(
            out,
            'figure2',
            {'rho': rho, 'qmax': qmax},
            None,
            started,
            perf_counter(),
            (table,),
        )


@app.command()
def figure3(
    rho: list[float] = Option(
        list(artifacts.FIGURE3_LOADS), help='Load; repeat for several.'
    ),
    qmax: int = Option(artifacts.FIGURE_QMAX, help='Highest q.'),
    events: int = Option(100_000, help='Events per run.'),
    runs: int = Option(50, help='Replications per load and graph.'),
    seed: int = Option(DEFAULT_SEED, help='Seed of all randomness.'),
    out: Path = _OUT,
):
    """Compare the homogeneous ring with the complete graph, four servers.

    Cancel-on-start differences are exact; join-the-idle-queue differences
    are simulated.

    """
    started = perf_counter()
    with _guard():
        tables = artifacts.figure3(rho, qmax, events, runs, seed)
        artifacts.write(
            out,
            'figure3',
            {
                'rho': rho,
                'qmax': qmax,
                'n_events': events,
                'n_runs': runs,
            },
            seed,
            started,
            perf_counter(),
            tables,
            events=events * runs * 2 * len(rho),
        )


@app.command()
def trend(
    family: FamilyChoice = Option(FamilyChoice.GRID, help='Graph family.'),
    n: int = Option(9, help='Number of servers.'),
    rho: list[float] = Option([0.3, 0.7], help='Load; repeat for several.'),
    policy: Policy = Option(Policy.COC, help='Policy.'),
    events: int = Option(100_000, help='Events per run.'),
    runs: int = Option(50, help='Replications per load and graph.'),
    seed: int = Option(DEFAULT_SEED, help='Seed of all randomness.'),
    out: Path = _OUT,
):
    """Compare a grid or ring with the complete graph by simulation."""
    started = perf_counter()
    with _guard():
        table = artifacts.trend(
            family.value, n, rho, policy, events, runs, seed
        )
        artifacts.write(
            out,
            'trend',
            {
                'family': family.value,
                'n': n,
                'rho': rho,
                'policy': policy.value,
                'n_events': events,
                'n_runs': runs,
            },
            seed,
            started,
            perf_counter(),
            (table,),
            events=events * runs * 2 * len(rho),
        )


@app.command()
def dominance(
    graph_a: Path = Argument(..., exists=True, help='Graph document for A.'),
    graph_b: Path = Argument(..., exists=True, help='Graph document for B.'),
    rho: float = Option(0.5, help='Load per server for the tail margins.'),
    qmax: int = Option(16, help='Highest q.'),
    arithmetic: Arithmetic = Option(Arithmetic.AUTO, help='Number type.'),
    out: Path = _OUT,
):
    """Check whether Q(A) is stochastically smaller than Q(B)."""
    started = perf_counter()
    with _guard():
        document_a = load(GraphDocument, graph_a)
        document_b = load(GraphDocument, graph_b)
        table, report, verdict = artifacts.dominance(
            document_a.build(),
            document_b.build(),
            rho,
            qmax,
            arithmetic.value,
        )
        artifacts.write(
            out,
            'dominance',
            {
                'a': dump(document_a),
                'b': dump(document_b),
                'rho': rho,
                'qmax': qmax,
                'arithmetic': arithmetic.value,
            },
            None,
            started,
            perf_counter(),
            (table,),
        )
        print(
            'Death-rate condition: '
            + _verdict(report.holds, report.first_violation)
        )
        print(
            f'Tail margins at ρ={rho}: '
            + _verdict(verdict.holds, verdict.first_violation)
        )


############
# INTERNAL #
############


@contextmanager
def _guard() -> Iterator[None]:
    """Translate library errors into one line on stderr and an exit code."""
    try:
        yield
    except (UnstableSystemError, InfeasibleError) as e:
        _error(str(e))
        raise Exit(EXIT_UNSTABLE)
    except Failure as e:
        artifacts.fail(e)
        raise Exit(1)
    except ValidationError as e:
        _error(_describe(e))
        raise Exit(EXIT_INVALID)
    except (RedlabError, OSError) as e:
        _error(str(e))
        raise Exit(EXIT_INVALID)


def _error(message: str) -> None:
    _STDERR.print(
        f'[bold red]Error:[/bold red] {escape(message)}', soft_wrap=True
    )


def _describe(exc: ValidationError) -> str:
    """Reduce a validation error to its first problem, naming the field."""
    error = exc.errors()[0]
    where = '.'.join(str(p) for p in error['loc'])
    return f'{where}: {error["msg"]}' if where else error['msg']


def _verdict(holds: bool, first_violation: int | None) -> str:
    if holds:
        return 'holds.'
    return f'fails first at q={first_violation}.'
