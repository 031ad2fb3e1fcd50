"""Empirical queue-length distributions from independent replications.

Each replication yields a time-weighted pmf. Pooled values are unweighted
means over replications, and confidence intervals are across-replication
normal approximations.

"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.stats import norm

from redlab.exc import InvalidParameterError

log = logging.getLogger(__name__)

#############
# INTERFACE #
#############

CONFIDENCE = 0.95


@dataclass(frozen=True)
class RunResult:
    """Time spent at each total number of jobs in one replication.

    busy_time[q] integrates the number of busy servers over time spent at q.
    quarter_means are the time-averaged Q over four consecutive quarters of
    the measured events.

    """

    run: int
    occupancy: tuple[float, ...]
    busy_time: tuple[float, ...]
    total_time: float
    events: int
    quarter_means: tuple[float, ...] = ()

    @property
    def pmf(self) -> np.ndarray:
        return np.asarray(self.occupancy) / self.total_time

    @property
    def drifts(self) -> bool:
        """Tell whether Q rose through every quarter, ending twice as high."""
        m = self.quarter_means
        if len(m) < 2:
            return False
        rising = all(a < b for a, b in zip(m, m[1:]))
        return rising and m[-1] > 2 * m[0] + 1


@dataclass(frozen=True)
class EmpiricalSummary:
    """Pooled pmf and CDF with their uncertainty, indexed by q = 0 … qmax."""

    pmf_mean: tuple[float, ...]
    pmf_ci95: tuple[float, ...]
    cdf_mean: tuple[float, ...]
    cdf_se: tuple[float, ...]

    def __post_init__(self):
        lengths = {
            len(self.pmf_mean),
            len(self.pmf_ci95),
            len(self.cdf_mean),
            len(self.cdf_se),
        }
        if len(lengths) != 1 or not self.pmf_mean:
            raise InvalidParameterError(
                'Columns of an empirical summary differ in length.'
            )

    @property
    def qmax(self) -> int:
        return len(self.pmf_mean) - 1


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Per-run time-weighted pmfs and their pooled statistics."""

    runs: tuple[RunResult, ...]

    def __post_init__(self):
        if not self.runs:
            raise InvalidParameterError('No replications to pool.')

    @classmethod
    def point_mass(cls, n_runs: int) -> EmpiricalDistribution:
        """Return the law of an empty system, as from λ = 0."""
        return cls(
            tuple(
                RunResult(run, (1.0,), (0.0,), 1.0, 0) for run in range(n_runs)
            )
        )

    @property
    def n_runs(self) -> int:
        return len(self.runs)

    @property
    def qmax(self) -> int:
        return self.pmfs.shape[1] - 1

    @cached_property
    def pmfs(self) -> np.ndarray:
        """Per-run pmfs, padded with zeros to a common support."""
        width = max(len(r.occupancy) for r in self.runs)
        table = np.zeros((self.n_runs, width))
        for n, r in enumerate(self.runs):
            table[n, : len(r.occupancy)] = r.pmf
        return table

    @cached_property
    def pmf_mean(self) -> np.ndarray:
        return self.pmfs.mean(axis=0)

    @cached_property
    def pmf_se(self) -> np.ndarray:
        return _standard_error(self.pmfs)

    @property
    def pmf_ci95(self) -> np.ndarray:
        return z_value() * self.pmf_se

    @cached_property
    def cdf_mean(self) -> np.ndarray:
        return np.cumsum(self.pmfs, axis=1).mean(axis=0)

    @cached_property
    def cdf_se(self) -> np.ndarray:
        return _standard_error(np.cumsum(self.pmfs, axis=1))

    @property
    def total_times(self) -> tuple[float, ...]:
        return tuple(r.total_time for r in self.runs)

    @property
    def events(self) -> int:
        return sum(r.events for r in self.runs)

    def drifting(self) -> tuple[int, ...]:
        """Return the replications whose Q kept rising."""
        return tuple(r.run for r in self.runs if r.drifts)

    def mean_busy(self) -> np.ndarray:
        """Estimate E[busy servers | Q = q], pooling time over runs."""
        time = np.zeros(self.qmax + 1)
        busy = np.zeros(self.qmax + 1)
        for r in self.runs:
            time[: len(r.occupancy)] += r.occupancy
            busy[: len(r.busy_time)] += r.busy_time
        with np.errstate(invalid='ignore', divide='ignore'):
            return np.where(time > 0, busy / time, np.nan)

    def summary(self) -> EmpiricalSummary:
        return EmpiricalSummary(
            tuple(map(float, self.pmf_mean)),
            tuple(map(float, self.pmf_ci95)),
            tuple(map(float, self.cdf_mean)),
            tuple(map(float, self.cdf_se)),
        )


@dataclass(frozen=True)
class EmpiricalDifference:
    """ℙ{B ≥ q} − ℙ{A ≥ q} for q = 1 … qmax, with combined errors."""

    difference: tuple[float, ...]
    se: tuple[float, ...]
    truncated: bool = False

    @property
    def qmax(self) -> int:
        return len(self.difference)

    @property
    def ci95(self) -> tuple[float, ...]:
        return tuple(z_value() * s for s in self.se)

    def supports_dominance(self, k: float = 2.0) -> bool:
        """Return True if no difference is below −k standard errors."""
        return all(d >= -k * s for d, s in zip(self.difference, self.se))


def z_value(confidence: float = CONFIDENCE) -> float:
    """Return the two-sided standard normal quantile."""
    return float(norm.ppf(1 / 2 + confidence / 2))


def compare_empirical(
    run_a: EmpiricalDistribution | EmpiricalSummary,
    run_b: EmpiricalDistribution | EmpiricalSummary,
    qmax: int | None = None,
) -> EmpiricalDifference:
    """Difference the pooled tails of two empirical laws.

    ℙ{B ≥ q} − ℙ{A ≥ q} = cdf_A(q − 1) − cdf_B(q − 1). Standard errors of
    independent runs combine in quadrature. Mismatched supports are cut to
    the common part, with a warning.

    """
    a = _summarize(run_a)
    b = _summarize(run_b)
    common = min(a.qmax, b.qmax) + 1
    wanted = common if qmax is None else qmax
    if wanted < 1:
        raise InvalidParameterError(f'qmax must be at least 1, not {qmax}.')
    truncated = wanted > common or (qmax is None and a.qmax != b.qmax)
    if truncated:
        log.warning(
            'Empirical supports differ (qmax %d and %d); comparing up to '
            'q = %d.',
            a.qmax,
            b.qmax,
            min(wanted, common),
        )
    top = min(wanted, common)
    cdf_a = np.asarray(a.cdf_mean[:top])
    cdf_b = np.asarray(b.cdf_mean[:top])
    se = np.hypot(np.asarray(a.cdf_se[:top]), np.asarray(b.cdf_se[:top]))
    return EmpiricalDifference(
        tuple(map(float, cdf_a - cdf_b)), tuple(map(float, se)), truncated
    )


############
# INTERNAL #
############


def _standard_error(samples: np.ndarray) -> np.ndarray:
    n = samples.shape[0]
    if n < 2:
        return np.zeros(samples.shape[1])
    return samples.std(axis=0, ddof=1) / np.sqrt(n)


def _summarize(
    run: EmpiricalDistribution | EmpiricalSummary,
) -> EmpiricalSummary:
    if isinstance(run, EmpiricalSummary):
        return run
    return run.summary()
