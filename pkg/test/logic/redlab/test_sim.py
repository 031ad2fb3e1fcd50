"""Unit tests for the corresponding module.

Simulation runs are short here; statistical checks have wide margins.

"""

from fractions import Fraction

import numpy as np
from pytest import approx, mark, raises

from redlab import sim
from redlab.alpha import coc_busy_profile
from redlab.closed import (
    coc_complete4_pmf,
    cos_complete4_pmf,
    cos_homring4_pmf,
    negbinom_law,
)
from redlab.data.config import Policy, SimConfig
from redlab.data.model import SystemParams
from redlab.empirical import RunResult, compare_empirical
from redlab.exc import Failure, UnstableSystemError
from redlab.graph import build_complete_uniform, build_ring
from redlab.sim import (
    REPORTKEY_RUN,
    REPORTKEY_TRACEBACK,
    simulate,
    simulate_run,
)

COMPLETE4 = build_complete_uniform(4)
RING4 = build_ring(4, Fraction(1, 2))
PAIRS4 = build_ring(4, Fraction(1))


def _config(policy=Policy.COC, rho=0.5, g=COMPLETE4, **kwargs) -> SimConfig:
    kwargs.setdefault('n_events', 20_000)
    kwargs.setdefault('n_runs', 2)
    kwargs.setdefault('seed', 1)
    return SimConfig(
        g, SystemParams.at_load(g.n_servers, rho), policy, **kwargs
    )


@mark.parametrize('policy', list(Policy))
def test_deterministic(policy):
    config = _config(policy)
    assert simulate_run(config, 0) == simulate_run(config, 0)
    assert simulate_run(config, 0) != simulate_run(config, 1)


def test_workers():
    """Check that the pool gives the same results as a single process."""
    config = _config(n_events=5000, n_runs=3)
    serial = simulate(config, workers=1)
    parallel = simulate(config, workers=2)
    assert serial == parallel
    assert [r.run for r in parallel.runs] == [0, 1, 2]


def test_progress():
    seen: list[int] = []
    simulate(_config(n_events=2000, n_runs=3), seen.append, workers=1)
    assert sorted(seen) == [0, 1, 2]


def test_idle():
    """Check that λ = 0 is an empty system, without events."""
    dist = simulate(_config(rho=0, n_runs=5))
    assert dist.n_runs == 5
    assert dist.events == 0
    assert list(dist.pmf_mean) == [1]


def test_measured_share():
    run = simulate_run(_config(warmup_fraction=0.25), 0)
    assert run.events == 20_000
    assert len(run.quarter_means) == 4
    assert sum(run.occupancy) == approx(run.total_time)
    assert run.pmf.sum() == approx(1)


@mark.parametrize('policy', list(Policy))
@mark.parametrize('tiebreak', ['uniform', 'longest_idle'])
@mark.parametrize(
    'g', [COMPLETE4, build_ring(4, Fraction(7, 10)), build_ring(6, 0.9)]
)
def test_invariants(policy, tiebreak, g):
    """Check the state after every event, at high load."""
    config = _config(
        policy,
        0.9,
        g,
        n_events=5000,
        n_runs=1,
        jiq_tiebreak=tiebreak,
        debug=True,
    )
    assert simulate_run(config, 0).events == 5000


def test_unstable():
    with raises(UnstableSystemError, match='Unstable'):
        simulate(_config(rho=1.0))


def test_allow_unstable(caplog):
    dist = simulate(
        _config(rho=1.2, n_events=2000, n_runs=1, allow_unstable=True),
        workers=1,
    )
    assert dist.n_runs == 1
    assert 'unstable' in caplog.text


def test_failure(monkeypatch):
    def broken(config, run):
        raise ValueError('bad draw')

    monkeypatch.setattr(sim, 'simulate_run', broken)
    with raises(Failure) as info:
        simulate(_config(), workers=1)
    assert info.value.description[REPORTKEY_RUN] == '0'
    assert 'bad draw' in info.value.description[REPORTKEY_TRACEBACK]


@mark.parametrize(
    '_, policy, g, closed',
    [
        ('coc_complete', Policy.COC, COMPLETE4, coc_complete4_pmf),
        ('cos_complete', Policy.COS, COMPLETE4, cos_complete4_pmf),
        ('cos_ring', Policy.COS, RING4, cos_homring4_pmf),
        ('coc_pairs', Policy.COC, PAIRS4, negbinom_law),
    ],
)
def test_law(_, policy, g, closed):
    """Check simulated probabilities against the explicit law.

    Most points fall inside the 95% interval and none far outside it.

    """
    rho = 0.5
    dist = simulate(_config(policy, rho, g, n_events=50_000, n_runs=10))
    law = closed(rho)
    misses = 0
    for q in range(7):
        gap = abs(dist.pmf_mean[q] - law.pmf(q))
        assert gap <= 2 * dist.pmf_ci95[q] + 1e-3
        misses += gap > dist.pmf_ci95[q]
    assert misses <= 2


def test_jiq_ordering():
    """Check that the complete graph leads the ring under JIQ."""
    complete, ring = (
        simulate(_config(Policy.JIQ, 0.8, g, n_events=50_000, n_runs=10))
        for g in (COMPLETE4, RING4)
    )
    assert compare_empirical(complete, ring, 4).supports_dominance()


def test_drift_flag():
    def run(means):
        return RunResult(0, (1.0,), (0.0,), 1.0, 10, means)

    assert run((1.0, 4.0, 9.0, 16.0)).drifts
    assert not run((1.0, 4.0, 3.0, 16.0)).drifts
    assert not run((2.0, 2.5, 3.0, 4.5)).drifts
    assert not run(()).drifts


def test_stable_flat():
    dist = simulate(_config(n_events=50_000, n_runs=4), workers=1)
    assert dist.drifting() == ()


def test_unstable_drifts(caplog):
    dist = simulate(
        _config(rho=1.2, n_events=4000, n_runs=2, allow_unstable=True),
        workers=1,
    )
    assert dist.drifting() == (0, 1)
    assert 'rose through every quarter' in caplog.text

def test_busy_coc():
    """Check departure rates against the coverage profile."""
    dist = simulate(_config(Policy.COC, 0.5, n_events=100_000, n_runs=4))
    busy = dist.mean_busy()
    profile = coc_busy_profile(COMPLETE4, 3)
    assert busy[0] == 0
    assert busy[1] == approx(2)
    assert busy[2] == approx(profile[2], abs=0.1)


@mark.parametrize('policy', [Policy.COS, Policy.JIQ])
def test_busy_single(policy):
    """Check that a lone job occupies one server without replicas."""
    dist = simulate(_config(policy, 0.3, n_events=20_000, n_runs=2))
    busy = dist.mean_busy()
    assert busy[1] == approx(1)
    assert np.all(busy[1:3] <= np.arange(1, 3) + 1e-12)

