"""Event-driven simulation of redundancy and join-the-idle-queue systems.

Every state transition, arrival or departure, is one event. Between events,
the total rate is Nλ plus μ for each busy server; since all clocks are
exponential, the next event is drawn afresh from that rate, and a departure
is equally likely to happen at any busy server. The total number of jobs is
integrated against time after a warm-up share of the events.

"""

from __future__ import annotations

import logging
from bisect import bisect_right
from collections import deque
from functools import partial
from multiprocessing import Pool
from traceback import format_exc
from typing import Callable

import numpy as np

from redlab.data.config import JiqTiebreak, Policy, SimConfig
from redlab.empirical import EmpiricalDistribution, RunResult
from redlab.exc import Failure, RedlabError, UnstableSystemError
from redlab.graph import stability
from redlab.misc import worker_count

log = logging.getLogger(__name__)

#############
# INTERFACE #
#############

REPORTKEY_RUN = 'run'
REPORTKEY_TRACEBACK = 'traceback'

Progress = Callable[[int], None]


def simulate(
    config: SimConfig,
    progress: Progress | None = None,
    workers: int | None = None,
) -> EmpiricalDistribution:
    """Run independent replications and pool them.

    Replication r draws from its own stream, seeded by (seed, r). Results do
    not depend on the number of workers.

    """
    if config.params.arrival_rate_per_server == 0:
        return EmpiricalDistribution.point_mass(config.n_runs)
    if not config.allow_unstable:
        report = stability(config.graph, config.params)
        if not report.stable:
            raise UnstableSystemError(report.describe())
    elif not stability(config.graph, config.params).stable:
        log.warning('Simulating an unstable system; Q will drift upward.')

    n_workers = min(worker_count(workers), config.n_runs)
    job = partial(_replicate, config)
    results: list[RunResult] = []
    if n_workers == 1:
        outcomes = map(job, range(config.n_runs))
        results = [_collect(o, progress) for o in outcomes]
    else:
        with Pool(n_workers) as pool:
            results = [
                _collect(o, progress)
                for o in pool.imap_unordered(job, range(config.n_runs))
            ]
    results.sort(key=lambda r: r.run)
    dist = EmpiricalDistribution(tuple(results))
    drifting = dist.drifting()
    if drifting:
        log.warning(
            'Q rose through every quarter of replication %s.',
            ', '.join(map(str, drifting)),
        )
    return dist


def simulate_run(config: SimConfig, run: int) -> RunResult:
    """Simulate one replication."""
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(config.seed, spawn_key=(run,)))
    )
    draws = _Draws(rng)
    graph = config.graph
    arrival = config.params.total_arrival_rate
    mu = config.params.service_speed
    cumulative = list(np.cumsum([float(p) for p in graph.weights]))
    cumulative[-1] = 1.0
    pairs = [e.pair for e in graph.edges]
    system = _SYSTEMS[config.policy](graph.n_servers, config.jiq_tiebreak)

    warmup = int(config.warmup_fraction * config.n_events)
    measured = config.n_events - warmup
    occupancy: list[float] = []
    busy_time: list[float] = []
    quarter_time = [0.0] * 4
    quarter_area = [0.0] * 4
    now = 0.0
    total = 0.0

    for event in range(config.n_events):
        n_busy = len(system.busy)
        rate = arrival + mu * n_busy
        dt = draws.exponential() / rate
        if event >= warmup:
            q = system.size
            while len(occupancy) <= q:
                occupancy.append(0.0)
                busy_time.append(0.0)
            occupancy[q] += dt
            busy_time[q] += dt * n_busy
            total += dt
            quarter = 4 * (event - warmup) // measured
            quarter_time[quarter] += dt
            quarter_area[quarter] += dt * q
        now += dt

        u = draws.uniform() * rate
        if u < arrival:
            e = min(bisect_right(cumulative, draws.uniform()), len(pairs) - 1)
            i, j = pairs[e]
            system.arrive(i, j, draws.uniform(), now)
        else:
            k = min(int((u - arrival) / mu), n_busy - 1)
            system.complete(system.busy.order[k], now)
        if config.debug:
            system.check()

    return RunResult(
        run,
        tuple(occupancy),
        tuple(busy_time),
        total,
        config.n_events,
        tuple(a / t if t else 0.0 for a, t in zip(quarter_area, quarter_time)),
    )


############
# INTERNAL #
############

_BATCH = 4096


class _Draws:
    """Batched standard exponentials and uniforms from one stream."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._exponentials: list[float] = []
        self._uniforms: list[float] = []

    def exponential(self) -> float:
        if not self._exponentials:
            self._exponentials = self._rng.standard_exponential(
                _BATCH
            ).tolist()[::-1]
        return self._exponentials.pop()

    def uniform(self) -> float:
        if not self._uniforms:
            self._uniforms = self._rng.random(_BATCH).tolist()[::-1]
        return self._uniforms.pop()


class _Servers:
    """A set of busy servers with uniform access by position."""

    def __init__(self):
        self.order: list[int] = []
        self._where: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.order)

    def __contains__(self, server: int) -> bool:
        return server in self._where

    def add(self, server: int) -> None:
        self._where[server] = len(self.order)
        self.order.append(server)

    def remove(self, server: int) -> None:
        position = self._where.pop(server)
        last = self.order.pop()
        if last != server:
            self.order[position] = last
            self._where[last] = position


class _System:
    """The state of a simulated system, with its transitions."""

    def __init__(self, n_servers: int, tiebreak: JiqTiebreak):
        self.n_servers = n_servers
        self.tiebreak = tiebreak
        self.busy = _Servers()
        self.size = 0  # Total number of jobs.

    def arrive(self, i: int, j: int, u: float, now: float) -> None:
        raise NotImplementedError

    def complete(self, server: int, now: float) -> None:
        raise NotImplementedError

    def check(self) -> None:
        """Assert state invariants."""


class _CancelOnCompletion(_System):
    """Replicas queue FCFS at both servers; the first to finish wins."""

    def __init__(self, n_servers: int, tiebreak: JiqTiebreak):
        super().__init__(n_servers, tiebreak)
        self.queues: list[deque[int]] = [
            deque() for _ in range(n_servers + 1)
        ]
        self.jobs: dict[int, tuple[int, int]] = {}
        self._ids = 0

    def arrive(self, i: int, j: int, u: float, now: float) -> None:
        job = self._ids
        self._ids += 1
        self.jobs[job] = (i, j)
        for s in (i, j):
            if not self.queues[s]:
                self.busy.add(s)
            self.queues[s].append(job)
        self.size += 1

    def complete(self, server: int, now: float) -> None:
        job = self.queues[server].popleft()
        i, j = self.jobs.pop(job)
        sibling = j if server == i else i
        self.queues[sibling].remove(job)
        for s in (server, sibling):
            if not self.queues[s]:
                self.busy.remove(s)
        self.size -= 1

    def check(self) -> None:
        covered = {s for pair in self.jobs.values() for s in pair}
        if covered != set(self.busy.order):
            raise RedlabError(
                f'Busy servers {sorted(self.busy.order)} differ from those '
                f'of queued jobs {sorted(covered)}.'
            )
        if self.size != len(self.jobs):
            raise RedlabError('Job count out of step with queued jobs.')


class _CancelOnStart(_System):
    """A central FCFS queue; replicas vanish when one starts service.

    Idle servers are kept in order of becoming idle, longest idle first. An
    arrival compatible with several idle servers goes to the longest idle.

    """

    def __init__(self, n_servers: int, tiebreak: JiqTiebreak):
        super().__init__(n_servers, tiebreak)
        self.waiting: list[tuple[int, int]] = []
        self.idle: list[int] = list(range(1, n_servers + 1))

    def arrive(self, i: int, j: int, u: float, now: float) -> None:
        self.size += 1
        for s in self.idle:
            if s == i or s == j:
                self.idle.remove(s)
                self.busy.add(s)
                return
        self.waiting.append((i, j))

    def complete(self, server: int, now: float) -> None:
        self.size -= 1
        for n, pair in enumerate(self.waiting):
            if server in pair:
                del self.waiting[n]
                return
        self.busy.remove(server)
        self.idle.append(server)

    def check(self) -> None:
        idle = set(self.idle)
        for i, j in self.waiting:
            if i in idle or j in idle:
                raise RedlabError(
                    f'A job of type {{{i}, {j}}} waits while a compatible '
                    'server is idle.'
                )
        if self.size != len(self.waiting) + len(self.busy):
            raise RedlabError('Job count out of step with the central queue.')


class _JoinIdleQueue(_System):
    """No replicas: each job joins one FCFS queue.

    An idle server among the sampled pair takes the job. When neither is
    idle, the job picks one of the two uniformly at random.

    """

    def __init__(self, n_servers: int, tiebreak: JiqTiebreak):
        super().__init__(n_servers, tiebreak)
        self.counts = [0] * (n_servers + 1)
        self.idle_since = [0.0] * (n_servers + 1)

    def arrive(self, i: int, j: int, u: float, now: float) -> None:
        idle_i = self.counts[i] == 0
        idle_j = self.counts[j] == 0
        if idle_i and idle_j and self.tiebreak == 'longest_idle':
            s = i if self.idle_since[i] <= self.idle_since[j] else j
        elif idle_i == idle_j:
            s = i if u < 0.5 else j
        else:
            s = i if idle_i else j
        if self.counts[s] == 0:
            self.busy.add(s)
        self.counts[s] += 1
        self.size += 1

    def complete(self, server: int, now: float) -> None:
        self.counts[server] -= 1
        self.size -= 1
        if self.counts[server] == 0:
            self.busy.remove(server)
            self.idle_since[server] = now

    def check(self) -> None:
        if self.size != sum(self.counts):
            raise RedlabError('Job count out of step with server queues.')


_SYSTEMS: dict[Policy, type[_System]] = {
    Policy.COC: _CancelOnCompletion,
    Policy.COS: _CancelOnStart,
    Policy.JIQ: _JoinIdleQueue,
}


def _replicate(
    config: SimConfig, run: int
) -> RunResult | tuple[int, str]:
    """Simulate one replication in a worker process.

    This function has a serializable signature and reports failure by value,
    because it is designed to work with multiprocessing.

    """
    try:
        return simulate_run(config, run)
    except Exception:
        return (run, format_exc())


def _collect(
    outcome: RunResult | tuple[int, str], progress: Progress | None
) -> RunResult:
    if isinstance(outcome, tuple):
        run, trace = outcome
        raise Failure(
            f'Replication {run} failed.',
            **{REPORTKEY_RUN: str(run), REPORTKEY_TRACEBACK: trace},
        )
    if progress:
        progress(outcome.run)
    return outcome
