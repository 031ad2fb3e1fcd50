"""Data and utilities shared between the package CLI and the library."""

import logging
from fractions import Fraction
from os import cpu_count, getenv

log = logging.getLogger(__name__)

DEFAULT_SEED = 20230517

ENV_THREADS = 'REDLAB_THREADS'

# Absolute tolerance on the total edge weight of a double-precision graph.
WEIGHT_SUM_TOLERANCE = 1e-12

# Significant digits in CSV output.
CSV_DIGITS = 12


def worker_count(requested: int | None = None) -> int:
    """Return the number of worker processes to use.

    The environment variable caps any request. Without either, use one worker
    per processor on the user’s machine.

    """
    n = requested or cpu_count() or 1
    cap = getenv(ENV_THREADS)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning(
                'Ignoring %s=%r; expected a whole number.', ENV_THREADS, cap
            )
    return max(1, n)


def number(value: float | int | Fraction) -> str:
    """Format a number for CSV output.

    Use “.” as decimal separator, no thousands separators and a fixed number
    of significant digits, for diff-able output.

    """
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    text = f'{float(value):.{CSV_DIGITS}g}'
    if text == '-0':
        return '0'
    return text
