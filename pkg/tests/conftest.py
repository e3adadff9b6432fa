"""Independent oracles and shared transcripts for the test suite.

The oracles are deliberately naive: trial division and divisor sums by
brute force, with no code shared with the package.
"""

from __future__ import annotations

import math
from fractions import Fraction

import pytest

from omegabound import prove_min_omega, render


def oracle_is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, math.isqrt(n) + 1))


def oracle_factor(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def oracle_sigma(n: int) -> int:
    return sum(d for d in range(1, n + 1) if n % d == 0)


def oracle_sii(n: int) -> Fraction:
    return Fraction(oracle_sigma(n), n)


@pytest.fixture(scope="session")
def transcript_text():
    """A small, complete, verified transcript reused by several tests."""
    return {K: render(prove_min_omega(K)) for K in (9, 11, 13, 15, 17)}


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
