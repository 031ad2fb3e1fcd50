"""Queue-length laws: analytic mixtures and tabulated distributions.

All laws are over the total number of jobs Q ∈ {0, 1, 2, …} and share the
accessors of the Law protocol. Throughout, tail(q) means ℙ{Q ≥ q}.

"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import expm1, log1p
from typing import Annotated, Protocol

import numpy as np
from pydantic import Field
from pydantic.dataclasses import dataclass as dantaclass

from redlab.exc import InvalidParameterError


class Law(Protocol):
    """A distribution on the non-negative integers."""

    def pmf(self, q: int) -> float: ...

    def cdf(self, q: int) -> float: ...

    def tail(self, q: int) -> float: ...


@dantaclass(frozen=True)
class SpectralTerm:
    """One geometric term c·q^k·b^q of a mixture."""

    coefficient: float
    base: Annotated[float, Field(ge=0, lt=1)]
    power: Annotated[int, Field(ge=0, le=1)] = 0

    def at(self, q: int) -> float:
        return self.coefficient * q**self.power * self.base**q

    def sum_from(self, q: int) -> float:
        """Return the sum of this term over all q′ ≥ q, q ≥ 0."""
        b = self.base
        head = self.coefficient * b**q / (1 - b)
        if self.power == 0:
            return head
        return head * (q * (1 - b) + b) / (1 - b)


@dantaclass(frozen=True)
class DifferenceTerm:
    """A term c·(b^q − a^q)/(b − a), for two bases a and b.

    Two geometric terms whose bases nearly coincide carry coefficients that
    diverge with opposite signs. Their difference is taken here as one
    smooth function of both bases, with q·a^(q−1) where they meet.

    """

    coefficient: float
    base: Annotated[float, Field(gt=0, lt=1)]
    other: Annotated[float, Field(gt=0, lt=1)]

    def at(self, q: int) -> float:
        return self.coefficient * self._quotient(q)

    def sum_from(self, q: int) -> float:
        """Return the sum of this term over all q′ ≥ q, q ≥ 0."""
        a, b = self.base, self.other
        scale = self.coefficient / ((1 - a) * (1 - b))
        if q <= 0:
            return scale
        return scale * (self._quotient(q) - a * b * self._quotient(q - 1))

    def _quotient(self, q: int) -> float:
        a, b = self.base, self.other
        if q <= 0:
            return 0.0
        if a == b:
            return q * a ** (q - 1)
        return a**q * expm1(q * log1p((b - a) / a)) / (b - a)


@dantaclass(frozen=True)
class SpectralDistribution:
    """A finite mixture of geometric terms with a common prefactor.

    pmf(q) = prefactor · Σ terms at q. When special_q0 is given, the mixture
    holds for q ≥ 1 only and special_q0 is ℙ{Q = 0}.

    """

    prefactor: float
    terms: tuple[SpectralTerm | DifferenceTerm, ...]
    special_q0: float | None = None

    def __post_init__(self):
        if not self.terms:
            raise InvalidParameterError('A mixture needs at least one term.')

    def pmf(self, q: int) -> float:
        if q < 0:
            return 0.0
        if q == 0 and self.special_q0 is not None:
            return self.special_q0
        return self.prefactor * sum(t.at(q) for t in self.terms)

    def tail(self, q: int) -> float:
        if q <= 0:
            return self.total()
        return self.prefactor * sum(t.sum_from(q) for t in self.terms)

    def cdf(self, q: int) -> float:
        if q < 0:
            return 0.0
        return self.total() - self.tail(q + 1)

    def total(self) -> float:
        """Return the total mass, by closed geometric sums."""
        if self.special_q0 is not None:
            return self.special_q0 + self.tail(1)
        return self.prefactor * sum(t.sum_from(0) for t in self.terms)


@dataclass(frozen=True)
class TabulatedDistribution:
    """A distribution given by its first probabilities.

    Mass beyond the table is carried by tail_mass and is not itemized.

    """

    probabilities: tuple[float, ...]
    tail_mass: float = 0.0

    @property
    def qmax(self) -> int:
        return len(self.probabilities) - 1

    @cached_property
    def _tails(self) -> np.ndarray:
        # Reverse summation keeps small tails precise.
        reverse = np.cumsum(np.asarray(self.probabilities)[::-1])[::-1]
        return np.append(reverse + self.tail_mass, self.tail_mass)

    def pmf(self, q: int) -> float:
        if 0 <= q <= self.qmax:
            return self.probabilities[q]
        return 0.0

    def tail(self, q: int) -> float:
        if q <= 0:
            return float(self._tails[0])
        return float(self._tails[min(q, self.qmax + 1)])

    def cdf(self, q: int) -> float:
        if q < 0:
            return 0.0
        return float(self._tails[0]) - self.tail(q + 1)

    def mean(self) -> float:
        return float(np.dot(np.arange(self.qmax + 1), self.probabilities))
