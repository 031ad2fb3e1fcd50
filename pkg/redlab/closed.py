"""Explicit laws of the total number of jobs on four servers.

Cancel-on-completion (c.o.c.) and cancel-on-start (c.o.s.) laws for the
uniform complete graph and rings, plus the degenerate reference laws: a
pooled M/M/1 queue and the negative binomial law of two disjoint pairs.

"""

from typing import Callable, Literal

from redlab.data.law import (
    DifferenceTerm,
    Law,
    SpectralDistribution,
    SpectralTerm,
)
from redlab.data.result import DominanceVerdict
from redlab.exc import InvalidParameterError, UnstableSystemError

#############
# INTERFACE #
#############

LawName = Literal[
    'coc-complete4',
    'coc-hetring4',
    'coc-homring4',
    'cos-complete4',
    'cos-homring4',
    'negbinom',
    'pooled-mm1',
]

HOMOGENEOUS_TOLERANCE = 1e-9


def coc_complete4_pmf(rho: float) -> SpectralDistribution:
    """Return the c.o.c. law on the uniform complete graph, N = 4."""
    _check_load(rho)
    return _mixture(
        (1 - rho) * (3 - rho) * (3 - 2 * rho) / 9,
        (-4, 2 * rho / 3),
        (1 / 2, rho / 3),
        (9 / 2, rho),
    )


def coc_homring4_pmf(rho: float) -> SpectralDistribution:
    """Return the c.o.c. law on the homogeneous ring, N = 4."""
    _check_load(rho)
    return _mixture(
        (1 - rho) * (2 - rho) * (3 - 2 * rho) / (6 - rho),
        (-6, 2 * rho / 3),
        (2, rho / 2),
        (5, rho),
    )


def coc_hetring4_pmf(rho: float, epsilon: float) -> SpectralDistribution:
    """Return the c.o.c. law on the heterogeneous ring, N = 4.

    The law is symmetric in ε ↔ 1 − ε, and ε > 1/2 is mapped below 1/2
    first. Near ε = 1/2 the dedicated homogeneous form is used. At ε = 1/3
    the bases 2ρ/3 and (1 − ε)ρ coincide, so their pair of terms is kept as
    a regular geometric term plus a difference quotient, with the limit
    (2ρ/3)^q·(−14/3 − 2q/3) at ε = 1/3 itself.

    """
    _check_load(rho)
    if epsilon in (0, 1):
        raise InvalidParameterError(
            f'At ε={epsilon} the ring falls apart into two disjoint pairs; '
            'use negbinom_pmf.'
        )
    if not 0 < epsilon < 1:
        raise InvalidParameterError(f'ε={epsilon} lies outside (0, 1).')
    if abs(epsilon - 1 / 2) < HOMOGENEOUS_TOLERANCE:
        return coc_homring4_pmf(rho)

    e = min(epsilon, 1 - epsilon)
    v = e * (1 - e)
    prefactor = (
        (1 - rho)
        * (1 - (1 - e) * rho)
        * (1 - e * rho)
        * (3 - 2 * rho)
        / (3 - 2 * rho + v * rho**2)
    )
    outer = [
        (e**2 / ((1 - e) * (2 - 3 * e)), e * rho),
        ((1 + v) / v, rho),
    ]
    # 6v/(2 − 9v)·a^q + (1 − e)²/(e(3e − 1))·b^q, with a = 2ρ/3 and
    # b = (1 − e)ρ, both poles at e = 1/3 factored out.
    return SpectralDistribution(
        prefactor,
        (
            SpectralTerm((1 - e) * (e + 2) / (e * (3 * e - 2)), 2 * rho / 3),
            DifferenceTerm(
                -rho * (1 - e) ** 2 / (3 * e), 2 * rho / 3, (1 - e) * rho
            ),
            *(SpectralTerm(c, b) for c, b in outer),
        ),
    )


def negbinom_pmf(rho: float, q: int) -> float:
    """Return (q + 1)(1 − ρ)²ρ^q, the law of two disjoint pairs."""
    _check_q(q)
    return negbinom_law(rho).pmf(q)


def negbinom_law(rho: float) -> SpectralDistribution:
    _check_load(rho, allow_zero=True)
    return SpectralDistribution(
        (1 - rho) ** 2, (SpectralTerm(1, rho), SpectralTerm(1, rho, 1))
    )


def pooled_mm1_pmf(rho: float, q: int) -> float:
    """Return (1 − ρ)ρ^q, the law of four fully pooled servers."""
    _check_q(q)
    return pooled_mm1_law(rho).pmf(q)


def pooled_mm1_law(rho: float) -> SpectralDistribution:
    _check_load(rho, allow_zero=True)
    return SpectralDistribution(1 - rho, (SpectralTerm(1, rho),))


def cos_complete4_pmf(rho: float) -> SpectralDistribution:
    """Return the c.o.s. law, with ALIS, on the uniform complete graph.

    ℙ{Q = 0} is the complement of the mixture over q ≥ 1.

    """
    _check_load(rho)
    c = (
        (1 - rho)
        * (3 - rho)
        * (3 - 2 * rho)
        / ((1 + rho) * (3 + rho) * (3 + 2 * rho))
    )
    return _complemented(
        c, (20, rho), (12, rho / 3), (-30, 2 * rho / 3)
    )


def cos_homring4_pmf(rho: float) -> SpectralDistribution:
    """Return the c.o.s. law, with ALIS, on the homogeneous ring.

    ℙ{Q = 0} is the complement of the mixture over q ≥ 1.

    """
    _check_load(rho)
    c = (
        48
        * (1 - rho)
        * (2 - rho)
        * (3 - 2 * rho)
        / (-2 * rho**3 + 55 * rho**2 + 121 * rho + 66)
    )
    return _complemented(
        c, (5, rho), (16 / 3, rho / 2), (-81 / 8, 2 * rho / 3)
    )


def stochastic_dominance_compare(
    dist_a: Law | Callable[[int], float],
    dist_b: Law | Callable[[int], float],
    qmax: int,
    tol: float = 0.0,
) -> DominanceVerdict:
    """Check A ≤st B, i.e. ℙ{A ≥ q} ≤ ℙ{B ≥ q} + tol for 1 ≤ q ≤ qmax.

    A bare pmf accessor is accepted too; its tail is taken as a complement.

    """
    if qmax < 1:
        raise InvalidParameterError(f'qmax must be at least 1, not {qmax}.')
    a = as_law(dist_a)
    b = as_law(dist_b)
    margins = tuple(b.tail(q) - a.tail(q) for q in range(1, qmax + 1))
    return DominanceVerdict(
        qmax, tol, all(m >= -tol for m in margins), margins
    )


def empty_prob_epsilon_derivative(rho: float, epsilon: float) -> float:
    """Return d/dε ℙ{Q = 0} for the heterogeneous ring, N = 4.

    The only factor that changes sign is (1 − 2ε), so the empty probability
    is largest at ε = 1/2.

    """
    _check_load(rho)
    if not 0 < epsilon < 1:
        raise InvalidParameterError(f'ε={epsilon} lies outside (0, 1).')
    v = epsilon * (1 - epsilon)
    return (
        rho**2
        * (1 - rho)
        * (3 - 2 * rho)
        * (2 - rho)
        * (1 - 2 * epsilon)
        / (3 - 2 * rho + v * rho**2) ** 2
    )


def law(name: LawName, rho: float, epsilon: float = 0.5) -> Law:
    """Look up a law by name. ε is used by the heterogeneous ring only."""
    if name == 'coc-complete4':
        return coc_complete4_pmf(rho)
    if name == 'coc-hetring4':
        return coc_hetring4_pmf(rho, epsilon)
    if name == 'coc-homring4':
        return coc_homring4_pmf(rho)
    if name == 'cos-complete4':
        return cos_complete4_pmf(rho)
    if name == 'cos-homring4':
        return cos_homring4_pmf(rho)
    if name == 'negbinom':
        return negbinom_law(rho)
    if name == 'pooled-mm1':
        return pooled_mm1_law(rho)
    raise InvalidParameterError(f'Unknown law “{name}”.')


def as_law(dist: Law | Callable[[int], float]) -> Law:
    if hasattr(dist, 'tail'):
        return dist  # type: ignore[return-value]
    return _PmfLaw(dist)  # type: ignore[arg-type]


############
# INTERNAL #
############


class _PmfLaw:
    """Adapt a normalized pmf accessor to the Law protocol."""

    def __init__(self, pmf: Callable[[int], float]):
        self._pmf = pmf

    def pmf(self, q: int) -> float:
        return self._pmf(q) if q >= 0 else 0.0

    def cdf(self, q: int) -> float:
        return sum(self._pmf(k) for k in range(q + 1))

    def tail(self, q: int) -> float:
        return 1 - self.cdf(q - 1)


def _check_load(rho: float, allow_zero: bool = False) -> None:
    if rho >= 1:
        raise UnstableSystemError(f'Load ρ={rho} is not below 1.')
    if rho < 0 or (rho == 0 and not allow_zero):
        raise InvalidParameterError(f'Load ρ={rho} is out of range.')


def _check_q(q: int) -> None:
    if q < 0:
        raise InvalidParameterError(f'q must not be negative, not {q}.')


def _mixture(
    prefactor: float, *terms: tuple[float, float]
) -> SpectralDistribution:
    return SpectralDistribution(
        prefactor, tuple(SpectralTerm(c, b) for c, b in terms)
    )


def _complemented(
    prefactor: float, *terms: tuple[float, float]
) -> SpectralDistribution:
    body = _mixture(prefactor, *terms)
    return SpectralDistribution(
        prefactor, body.terms, special_q0=1 - body.tail(1)
    )
