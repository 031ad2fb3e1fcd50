"""Utilities for working directly with redlab’s dataclasses."""

from fractions import Fraction
from math import isfinite
from typing import Any, Iterable, Literal

import numpy as np

from redlab.exc import InvalidParameterError

Weight = Fraction | float
Arithmetic = Literal['rational', 'double']


def weight(value: Any) -> Weight:
    """Coerce a number to an exact rational or a double.

    Integers and decimal strings are exact. Doubles stay doubles.

    """
    if isinstance(value, bool):
        raise InvalidParameterError(
            f'Cannot use {quote_value(value)} as a number.'
        )
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not isfinite(value):
            raise InvalidParameterError(
                f'Cannot use non-finite {quote_value(value)} as a number.'
            )
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParameterError(
                f'Cannot parse {quote_value(value)} as a number.'
            ) from exc
    raise InvalidParameterError(
        f'Cannot use {quote_value(value)} as a number.'
    )


def unweight(value: Weight) -> str | float:
    """Express a number for JSON so that weight() restores it."""
    if isinstance(value, Fraction):
        return str(value)
    return float(value)


def convert(value: Weight | int, arithmetic: Arithmetic) -> Weight:
    """Express a number in the selected arithmetic."""
    if arithmetic == 'rational':
        return Fraction(value)
    return float(value)


def exact(values: Iterable[Any]) -> bool:
    """Return True if all values are exact rationals."""
    return all(isinstance(v, (Fraction, int)) for v in values)


def bit(server: int) -> int:
    """Map a 1-based server id to its bit."""
    return 1 << (server - 1)


def pair_mask(i: int, j: int) -> int:
    return bit(i) | bit(j)


def servers(mask: int) -> tuple[int, ...]:
    """List the 1-based server ids in a bitmask."""
    ids = []
    position = 1
    while mask:
        if mask & 1:
            ids.append(position)
        mask >>= 1
        position += 1
    return tuple(ids)


def quote_value(value: Any) -> str:
    """Describe a bad value for the benefit of the user."""
    t = f'of type {type(value).__name__}'
    try:
        value = str(value)
    except (TypeError, ValueError):
        return t

    if len(value) > 30:
        return f'“{value[:20]}...” (truncated) {t}'

    return f'“{value}” {t}'


def popcount(x: np.ndarray) -> np.ndarray:
    """Count set bits in an array of 64-bit integers, elementwise."""
    x = x.astype(np.uint64)
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return ((x * _H01) >> np.uint64(56)).astype(np.int64)


_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
