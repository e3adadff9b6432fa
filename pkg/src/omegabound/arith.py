"""Exact integer and rational arithmetic used throughout the search.

Everything here is a pure function of its arguments.  Rationals are
:class:`fractions.Fraction`, which is gcd-reduced at construction and
compares exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import gmpy2

# Miller-Rabin with the first 13 prime bases is deterministic below this
# bound (Sorenson and Webster, 2015).
_MR_DETERMINISTIC_LIMIT = 3317044064679887385961981
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def primes_below(limit: int) -> list[int]:
    """All primes ``p < limit`` by a plain sieve of Eratosthenes."""
    if limit < 3:
        return []
    sieve = bytearray([1]) * limit
    sieve[0] = sieve[1] = 0
    for p in range(2, math.isqrt(limit - 1) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytes(len(range(p * p, limit, p)))
    return [i for i, flag in enumerate(sieve) if flag]


_SMALL_PRIMES = primes_below(1000)


def _strong_probable_prime(n: int, base: int) -> bool:
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    x = pow(base, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_probable_prime(n: int) -> bool:
    """Fast screen.  ``False`` is always correct; ``True`` is certain only
    below ``3.3e24``."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    if n < 1_000_000:
        return True
    return all(_strong_probable_prime(n, a % n) for a in _MR_BASES)


@lru_cache(maxsize=1 << 16)
def is_prime(n: int) -> bool:
    """Deterministic primality.

    Below 3.3e24 the fixed-base Miller-Rabin test is a proof.  Above it a
    probable prime is certified with FLINT's proving test (APR-CL), so any
    prime this function accepts may be written into a transcript.
    """
    if not is_probable_prime(n):
        return False
    if n < _MR_DETERMINISTIC_LIMIT:
        return True
    import flint

    return bool(flint.fmpz(n).is_prime())


def is_perfect_power(n: int) -> Optional[tuple[int, int]]:
    """Return ``(base, exp)`` with ``exp >= 2`` maximal if ``n = base**exp``.

    >>> is_perfect_power(28561)
    (13, 4)
    >>> is_perfect_power(12) is None
    True
    """
    if n < 2:
        return None
    base, exp = n, 1
    k = 2
    # Peel prime root orders; the surviving base is not a perfect power.
    while k <= base.bit_length():
        root, exact = gmpy2.iroot(base, k)
        if exact:
            base = int(root)
            exp *= k
            continue
        k = int(gmpy2.next_prime(k))
    if exp == 1:
        return None
    return base, exp


def sigma_prime_power(p: int, a: int) -> int:
    """``1 + p + ... + p**a``."""
    if a < 0:
        raise ValueError("exponent must be non-negative")
    return (p ** (a + 1) - 1) // (p - 1)


def sii_prime_power(p: int, a: int) -> Fraction:
    """Abundancy ``sigma(p**a) / p**a`` in lowest terms."""
    return Fraction(sigma_prime_power(p, a), p**a)


def format_decimal(x: Fraction, significant: int = 10) -> str:
    """Round ``x`` to ``significant`` digits, nearest, no exponent notation.

    Matches the transcript tags: ``209664/90089`` renders as ``2.327298560``.
    """
    with localcontext() as ctx:
        ctx.prec = significant
        value = Decimal(x.numerator) / Decimal(x.denominator)
    return format(value, "f")


@dataclass(frozen=True, order=True)
class PrimePower:
    """An exact assignment ``prime**exponent || N``; exponent 0 marks a
    prime that cannot divide ``N``."""

    prime: int
    exponent: int

    def __post_init__(self) -> None:
        if self.exponent < 0:
            raise ValueError(f"negative exponent {self.exponent}")
        if not is_prime(self.prime):
            raise ValueError(f"{self.prime} is not prime")

    @property
    def forbidden(self) -> bool:
        return self.exponent == 0

    def sigma(self) -> int:
        return sigma_prime_power(self.prime, self.exponent)

    def abundancy(self) -> Fraction:
        return sii_prime_power(self.prime, self.exponent)

    def __str__(self) -> str:
        if self.exponent == 1:
            return str(self.prime)
        return f"{self.prime}^{self.exponent}"
