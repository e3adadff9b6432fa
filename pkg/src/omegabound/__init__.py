"""Lower bounds on the number of prime factors of an odd perfect number.

The engine assumes ``Omega(N) <= K - 2`` for a hypothetical odd perfect
number ``N`` and refutes every admissible chain of prime-power assignments,
writing an indented transcript that :func:`omegabound.prooflog.verify` can
re-check without trusting the search code.
"""

from omegabound.arith import (
    PrimePower,
    format_decimal,
    is_perfect_power,
    is_prime,
    sigma_prime_power,
    sii_prime_power,
)
from omegabound.factor import (
    EffortPolicy,
    HintsDB,
    PartialFactorization,
    factor_easy,
    load_hints,
    split_by_gcd,
)
from omegabound.search import (
    BranchState,
    CohenSorliInterval,
    Contradiction,
    ProofSearch,
    StuckBranch,
    StuckProof,
    cohen_sorli_interval,
    prove_min_omega,
)
from omegabound.prooflog import Transcript, parse, render, verify

__version__ = "0.1.0"

__all__ = [
    "BranchState",
    "CohenSorliInterval",
    "Contradiction",
    "EffortPolicy",
    "HintsDB",
    "PartialFactorization",
    "PrimePower",
    "ProofSearch",
    "StuckBranch",
    "StuckProof",
    "Transcript",
    "cohen_sorli_interval",
    "factor_easy",
    "format_decimal",
    "is_perfect_power",
    "is_prime",
    "load_hints",
    "parse",
    "prove_min_omega",
    "render",
    "sigma_prime_power",
    "sii_prime_power",
    "split_by_gcd",
    "verify",
]
