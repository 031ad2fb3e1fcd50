"""Unit tests for the corresponding module."""

import logging
from fractions import Fraction

from pytest import mark

from redlab.misc import ENV_THREADS, number, worker_count


@mark.parametrize(
    '_, env, requested, oracle',
    [
        ('request', None, 3, 3),
        ('capped', '2', 8, 2),
        ('cap_above', '16', 4, 4),
        ('cap_floor', '0', 4, 1),
    ],
)
def test_worker_count(_, env, requested, oracle, monkeypatch):
    if env is None:
        monkeypatch.delenv(ENV_THREADS, raising=False)
    else:
        monkeypatch.setenv(ENV_THREADS, env)
    assert worker_count(requested) == oracle


def test_worker_count_malformed(monkeypatch, caplog):
    monkeypatch.setenv(ENV_THREADS, 'many')
    with caplog.at_level(logging.WARNING, logger='redlab.misc'):
        assert worker_count(3) == 3
    assert ENV_THREADS in caplog.text
    assert "'many'" in caplog.text


@mark.parametrize(
    'value, oracle',
    [
        (3, '3'),
        (True, '1'),
        (Fraction(1, 3), '0.333333333333'),
        (-0.0, '0'),
        (0.25, '0.25'),
    ],
)
def test_number(value, oracle):
    assert number(value) == oracle
