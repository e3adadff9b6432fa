"""Depth-first refutation of every admissible factor chain.

A node of the search is a :class:`BranchState`: the exact prime powers
assumed so far, the primes their divisor sums force into ``N``, leftover
composites that could not be factored, and primes ruled out within the
current sub-branch.  Each new assignment ``q^e || N`` pulls in the factors
of ``sigma(q^e)``; the node dies as soon as one of five contradictions
fires.  When no forced prime is left to branch on, the Cohen-Sorli bound
on the smallest unknown prime gives a finite list of primes to try.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from collections import Counter
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Optional, Union

from omegabound.arith import (
    PrimePower,
    format_decimal,
    is_perfect_power,
    is_prime,
    primes_below,
    sigma_prime_power,
    sii_prime_power,
)
from omegabound.factor import (
    EffortPolicy,
    HintsDB,
    PartialFactorization,
    coprime_base,
    factor_easy,
    format_hints,
)
from omegabound.prooflog import (
    Assign,
    CSEnd,
    CSStart,
    CSTry,
    CSTrying,
    Stuck,
    Transcript,
    Wish,
    cs_render_bounds,
)

SMALL_PRIMES = (3, 5, 7, 11)
DEFAULT_THRESHOLD = 100_000
ABUNDANCY_RULES = ("multiplicity", "parity")

# Minimum omega(N) once a prefix of (3, 5, 7, 11) is known not to divide N.
OMEGA_THRESHOLDS = ((3, 11), (5, 15), (7, 27), (11, 41))
OMEGA_MIN = 8
# With 3, 5, 7 and 11 all excluded omega(N) >= 41, so Omega(N) >= 81.
CAPSTONE_OMEGA = 81


class StuckBranch(Exception):
    """The Cohen-Sorli interval is too wide to enumerate."""

    def __init__(
        self,
        upper: Fraction,
        numbers: Iterable[PrimePower] = (),
        residuals: Iterable[int] = (),
    ):
        self.upper = upper
        self.numbers = tuple(numbers)
        self.residuals = tuple(sorted(residuals))
        wanted = ", ".join(f"sigma({pp})" for pp in self.numbers) or "unknown"
        super().__init__(f"interval upper bound {float(upper):.6g} too large; need factors of {wanted}")

    def wishes(self) -> list[str]:
        origin = ", ".join(f"sigma({pp})" for pp in self.numbers)
        return [f"c_{len(str(c))} = {c} from {origin}" for c in self.residuals]


class StuckProof(Exception):
    """A proof attempt left open branches; carries the partial transcript."""

    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        super().__init__(f"{len(transcript.wishes)} divisor sums need more factors")


class OddPerfectCandidate(RuntimeError):
    """A fully determined branch has abundancy exactly 2."""


@dataclass(frozen=True)
class Contradiction:
    kind: str
    prime: Optional[int] = None
    abundancy: Optional[Fraction] = None

    EXCESS_PRIME = "excess-prime"
    EXCESS_PRIME_COUNT = "excess-prime-count"
    EXPONENT_BOUNDS = "exponent-bounds"
    ABUNDANCY_EXCESS = "abundancy-excess"
    OMEGA_BOUND = "omega-bound"

    @property
    def tag(self) -> str:
        if self.kind == self.EXCESS_PRIME:
            return f"xs={self.prime}"
        if self.kind == self.EXCESS_PRIME_COUNT:
            return "xs=prime"
        if self.kind == self.EXPONENT_BOUNDS:
            return "exponent bounds exceeded"
        if self.kind == self.ABUNDANCY_EXCESS:
            return f"S={format_decimal(self.abundancy)}"
        return "violate omega bound"


@dataclass(frozen=True)
class BranchState:
    """The full hypothesis at one search node.

    ``required`` holds primes known to divide ``N`` whose exponent is not
    fixed yet, with the multiplicity forced so far; ``absorbed`` holds the
    same count for assigned primes, which must never exceed the assigned
    exponent.  ``residuals`` maps unfactored composites to multiplicity.
    """

    bound: int
    assigned: Mapping[int, int] = field(default_factory=dict)
    required: Mapping[int, int] = field(default_factory=dict)
    residuals: Mapping[int, int] = field(default_factory=dict)
    forbidden: frozenset = frozenset()
    excluded_small: frozenset = frozenset()
    absorbed: Mapping[int, int] = field(default_factory=dict)
    # Assignments whose divisor sum was only partly factored.
    unfactored: tuple = ()

    @property
    def budget(self) -> int:
        return self.bound - sum(self.assigned.values())

    @property
    def special(self) -> Optional[tuple[int, int]]:
        for p, a in self.assigned.items():
            if a % 2:
                return p, a
        return None

    @property
    def excluded(self) -> frozenset:
        return self.forbidden | self.excluded_small

    def check_invariants(self) -> None:
        budget = self.budget
        assert budget >= 0, "negative budget"
        odd = [(p, a) for p, a in self.assigned.items() if a % 2]
        assert len(odd) <= 1, f"two odd exponents {odd}"
        for p, a in odd:
            assert p % 4 == 1 and a % 4 == 1, f"bad special prime {p}^{a}"
        primes = set(self.assigned)
        assert not primes & set(self.required), "prime both assigned and required"
        assert not primes & self.forbidden, "prime both assigned and forbidden"
        for c in self.residuals:
            for other in self.residuals:
                assert other == c or math.gcd(c, other) == 1, "residuals not coprime"
            for p in primes | set(self.required) | self.forbidden:
                assert c % p, f"residual shares factor {p}"

    def with_assignment(self, q: int, e: int) -> "BranchState":
        assigned = dict(self.assigned)
        assigned[q] = e
        required = dict(self.required)
        absorbed = dict(self.absorbed)
        absorbed[q] = required.pop(q, 0)
        return replace(self, assigned=assigned, required=required, absorbed=absorbed)

    def forbid(self, q: int) -> "BranchState":
        return replace(self, forbidden=self.forbidden | {q})

    def describe(self) -> str:
        parts = [str(PrimePower(p, a)) for p, a in sorted(self.assigned.items())]
        return " * ".join(parts) or "1"


def absorb_factors(
    state: BranchState, f: PartialFactorization, source: Optional[PrimePower] = None
) -> Union[BranchState, Contradiction]:
    """Merge the factorization of ``sigma(source)`` into ``state``.

    ``source`` defaults to the exponent-odd test on the newest assignment;
    it decides whether ``sigma`` is allowed its single factor 2.
    """
    twos = f.multiplicity(2)
    odd_exponent = source is not None and source.exponent % 2 == 1
    if twos > 1 or (twos == 1 and source is not None and not odd_exponent):
        raise AssertionError(f"sigma({source}) has 2^{twos}; N is odd")

    required = Counter(state.required)
    absorbed = Counter(state.absorbed)

    def add(p: int, k: int) -> None:
        if p in state.assigned:
            absorbed[p] += k
        else:
            required[p] += k

    for p, k in f.prime_factors:
        if p != 2:
            add(p, k)
    pieces = Counter(state.residuals)
    unfactored = state.unfactored
    if f.residual is not None:
        pieces[f.residual] += f.residual_exponent
        if source is not None:
            unfactored = unfactored + (source,)

    while pieces:
        known = set(state.assigned) | set(required) | state.forbidden
        known_product = math.prod(known)
        dirty = False
        settled: Counter = Counter()
        for b, k in coprime_base(pieces).items():
            if math.gcd(b, known_product) > 1:
                for p in sorted(known):
                    while b % p == 0:
                        b //= p
                        add(p, k)
                        dirty = True
            if b == 1:
                continue
            if is_prime(b):
                add(b, k)
                dirty = True
                continue
            pp = is_perfect_power(b)
            if pp is not None:
                settled[pp[0]] += k * pp[1]
                dirty = True
                continue
            settled[b] += k
        pieces = settled
        if not dirty:
            break

    offenders = [p for p, k in absorbed.items() if k > state.assigned[p]]
    offenders += [p for p in required if p in state.forbidden]
    if offenders:
        return Contradiction(Contradiction.EXCESS_PRIME, prime=min(offenders))
    return replace(
        state,
        required=dict(required),
        absorbed=dict(absorbed),
        residuals=dict(pieces),
        unfactored=unfactored if pieces else (),
    )


def max_new_distinct_primes(state: BranchState) -> int:
    """Most distinct primes that still fit in the exponent budget."""
    budget = state.budget
    if state.special is None and budget >= 1:
        return 1 + (budget - 1) // 2
    return budget // 2


def assigned_abundancy(state: BranchState) -> Fraction:
    out = Fraction(1)
    for p, a in state.assigned.items():
        out *= sii_prime_power(p, a)
    return out


def needed_new_primes(state: BranchState) -> int:
    needed = len(state.required) + 2 * len(state.residuals)
    if needed == 0 and assigned_abundancy(state) != 2:
        # sigma(N)/N = 2 cannot hold for the assigned part alone.
        needed = 1
    return needed


def check_prime_count(state: BranchState) -> Optional[Contradiction]:
    if needed_new_primes(state) > max_new_distinct_primes(state):
        return Contradiction(Contradiction.EXCESS_PRIME_COUNT)
    return None


def check_partition(state: BranchState) -> Optional[Contradiction]:
    if state.special is not None or state.residuals:
        return None
    if 2 * len(state.required) <= state.budget:
        return None
    if any(p % 4 == 1 for p in state.required):
        return None
    return Contradiction(Contradiction.EXPONENT_BOUNDS)


def minimum_exponent(state: BranchState, p: int, rule: str = "multiplicity") -> int:
    m = max(state.required.get(p, 0), 1)
    if rule == "parity":
        special = state.special
        if p % 4 == 3 or (special is not None and special[0] != p):
            m += m % 2
    return m


def abundancy_lower_bound(state: BranchState, rule: str = "multiplicity") -> Fraction:
    """Exact lower bound on ``sigma(N)/N`` from everything the state knows.

    ``rule="parity"`` also uses that a required prime which cannot be the
    special prime has an even exponent.
    """
    if rule not in ABUNDANCY_RULES:
        raise ValueError(f"unknown abundancy rule {rule!r}")
    out = assigned_abundancy(state)
    for p in state.required:
        out *= sii_prime_power(p, minimum_exponent(state, p, rule))
    for c in state.residuals:
        out *= Fraction(c + 1, c)
    return out


def check_abundancy(state: BranchState, rule: str = "multiplicity") -> Optional[Contradiction]:
    s = abundancy_lower_bound(state, rule)
    if s > 2:
        return Contradiction(Contradiction.ABUNDANCY_EXCESS, abundancy=s)
    return None


def omega_threshold(excluded: Iterable[int]) -> int:
    excluded = set(excluded)
    t = OMEGA_MIN
    for p, bound in OMEGA_THRESHOLDS:
        if p not in excluded:
            break
        t = bound
    return t


def check_omega_bound(state: BranchState) -> Optional[Contradiction]:
    t = omega_threshold(state.excluded)
    if len(state.assigned) + max_new_distinct_primes(state) < t:
        return Contradiction(Contradiction.OMEGA_BOUND)
    return None


def first_contradiction(state: BranchState, rule: str = "multiplicity") -> Optional[Contradiction]:
    return (
        check_prime_count(state)
        or check_partition(state)
        or check_abundancy(state, rule)
        or check_omega_bound(state)
    )


@dataclass(frozen=True)
class CohenSorliInterval:
    """Smallest unknown prime ``q`` satisfies ``lower <= q < upper``."""

    lower: Fraction
    upper: Fraction
    formula_used: str

    @property
    def empty(self) -> bool:
        return self.lower >= self.upper


def cohen_sorli_interval(S: Fraction, r: int) -> CohenSorliInterval:
    if S >= 2:
        raise ValueError("Cohen-Sorli bound needs S < 2")
    if r < 1:
        raise ValueError("need at least one unknown prime")
    S = Fraction(S)
    lower = max(Fraction(3), S / (2 - S))
    upper = (2 + S * (r - 1)) / (2 - S)
    formula = "r_small"
    if r >= 3:
        tighter = (8 + 2 * S * S * (r - 1)) / (4 - S * S)
        if tighter < upper:
            upper, formula = tighter, "r_ge_3"
    return CohenSorliInterval(lower, upper, formula)


@lru_cache(maxsize=4)
def _primes_table(limit: int) -> tuple[int, ...]:
    return tuple(primes_below(limit))


def enumerate_interval_primes(
    state: BranchState, iv: CohenSorliInterval, threshold: int = DEFAULT_THRESHOLD
) -> list[int]:
    if iv.upper >= threshold:
        raise StuckBranch(iv.upper, state.unfactored, state.residuals)
    lo = math.ceil(iv.lower)
    return [
        q
        for q in _primes_table(threshold)
        if lo <= q < iv.upper and q not in state.forbidden and q not in state.assigned
    ]


def candidate_exponents(state: BranchState, q: int) -> list[int]:
    budget = state.budget
    special_ok = q % 4 == 1 and state.special is None
    floor = state.required.get(q, 1)
    return [
        e
        for e in range(max(floor, 1), budget + 1)
        if e % 2 == 0 or (special_ok and e % 4 == 1)
    ]


def config_digest(config: Mapping) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class ProofSearch:
    """One proof run: fixed target, hints, effort policy and search options."""

    def __init__(
        self,
        target: int,
        hints: Optional[HintsDB] = None,
        policy: Optional[EffortPolicy] = None,
        *,
        threshold: int = DEFAULT_THRESHOLD,
        abundancy_rule: str = "multiplicity",
        jobs: int = 1,
        split_depth: int = 1,
    ):
        if target % 2 == 0 or not 9 <= target <= CAPSTONE_OMEGA:
            raise ValueError(f"target K must be odd with 9 <= K <= {CAPSTONE_OMEGA}, got {target}")
        if abundancy_rule not in ABUNDANCY_RULES:
            raise ValueError(f"unknown abundancy rule {abundancy_rule!r}")
        if jobs < 1:
            raise ValueError("jobs must be positive")
        self.target = target
        self.bound = target - 2
        self.hints = hints or HintsDB()
        self.policy = policy or EffortPolicy()
        self.threshold = threshold
        self.abundancy_rule = abundancy_rule
        self.jobs = jobs
        self.split_depth = split_depth
        self._sigma_cache: dict[tuple[int, int], PartialFactorization] = {}
        self._pool: Optional[ProcessPoolExecutor] = None
        self.stuck: list[str] = []

    @property
    def config(self) -> dict:
        return {
            "K": self.target,
            "B": self.bound,
            "trial_division_bound": self.policy.trial_division_bound,
            "rho_iteration_cap": self.policy.rho_iteration_cap,
            "rho_restart_count": self.policy.rho_restart_count,
            "seed": self.policy.seed,
            "small_threshold": self.threshold,
            "abundancy_rule": self.abundancy_rule,
            "hints": hashlib.sha256(format_hints(self.hints).encode()).hexdigest()[:16],
        }

    def sigma_factorization(self, q: int, e: int, quick: bool = False) -> PartialFactorization:
        """Factor ``sigma(q^e)``; ``quick`` spends 1/64 of one rho restart."""
        key = (q, e, quick)
        f = self._sigma_cache.get(key)
        if f is None:
            policy = self.policy
            if quick:
                policy = replace(
                    policy, rho_iteration_cap=max(1, policy.rho_iteration_cap >> 6), rho_restart_count=1
                )
            f = factor_easy(sigma_prime_power(q, e), self.hints, policy)
            self._sigma_cache[key] = f
        return f

    def _settle_assignment(self, state: BranchState, q: int, e: int, quick: bool):
        f = self.sigma_factorization(q, e, quick)
        child = absorb_factors(state.with_assignment(q, e), f, PrimePower(q, e))
        if isinstance(child, Contradiction):
            return f, child, child
        return f, child, first_contradiction(child, self.abundancy_rule)

    def root_state(self, excluded: Iterable[int] = ()) -> BranchState:
        excluded = frozenset(excluded)
        return BranchState(bound=self.bound, forbidden=excluded, excluded_small=excluded)

    # -- search ---------------------------------------------------------

    def refute_assignment(self, state: BranchState, q: int, e: int, depth: int) -> Iterator:
        """Assume ``q^e || N`` on top of ``state`` and refute the result.

        Yields events lazily (or futures, when a pool is attached), so a
        caller may stop after the first leaf of a huge subtree.
        """
        # A cheap factorization often already yields a contradiction; full
        # effort is spent only on nodes that survive it.
        f, child, found = self._settle_assignment(state, q, e, quick=True)
        if found is None and not f.complete:
            f, child, found = self._settle_assignment(state, q, e, quick=False)
        if found is not None:
            yield Assign(depth, q, e, tuple(f.tokens()), found.tag)
            return
        yield Assign(depth, q, e, tuple(f.tokens()), None)
        yield from self.refute_branch(child, depth + 1)

    def refute_branch(self, state: BranchState, depth: int = 0) -> Iterator:
        """Children of a consistent node: branch on the smallest required
        prime, or fall back to the Cohen-Sorli enumeration."""
        if state.required:
            yield from self._branch_prime(state, min(state.required), depth)
        else:
            yield from self._cohen_sorli(state, depth)

    def _branch_prime(self, state: BranchState, q: int, depth: int) -> Iterator:
        for e in candidate_exponents(state, q):
            if self._pool is not None and depth == self.split_depth:
                yield self._pool.submit(_worker_refute, state, q, e, depth)
            else:
                yield from self.refute_assignment(state, q, e, depth)

    def _cohen_sorli(self, state: BranchState, depth: int) -> Iterator:
        S = assigned_abundancy(state)
        if S >= 2:
            raise OddPerfectCandidate(f"assigned part {state.describe()} has abundancy {S}")
        iv = cohen_sorli_interval(S, max_new_distinct_primes(state))
        if state.residuals:
            for pp in state.unfactored:
                yield Wish(depth, pp.prime, pp.exponent)
        lo, hi = cs_render_bounds(iv.lower, iv.upper)
        try:
            primes = enumerate_interval_primes(state, iv, self.threshold)
        except StuckBranch as exc:
            self.stuck.extend(exc.wishes())
            yield Stuck(depth, lo, hi)
            return
        yield CSStart(depth, lo, hi)
        yield CSTrying(depth)
        s = state
        for q in primes:
            yield CSTry(depth, q)
            yield from self._branch_prime(s, q, depth)
            s = s.forbid(q)
        yield CSEnd(depth)

    def run(self) -> Transcript:
        """Refute 3 | N, 5 | N, 7 | N and 11 | N in turn."""
        started = time.perf_counter()
        self.stuck = []
        if self.jobs > 1:
            self._pool = ProcessPoolExecutor(
                self.jobs, initializer=_worker_init, initargs=(self._worker_args(),)
            )
        try:
            events: list = []
            excluded: list[int] = []
            for q in SMALL_PRIMES:
                root = self.root_state(excluded)
                for e in candidate_exponents(root, q):
                    # Drain fully before resolving so every future is queued.
                    events.extend(self.refute_assignment(root, q, e, 0))
                excluded.append(q)
            events = _resolve(events, self)
        finally:
            if self._pool is not None:
                self._pool.shutdown()
                self._pool = None
        wishes = _wish_list(self.stuck)
        transcript = Transcript(
            target=self.target,
            config=self.config,
            events=events,
            wishes=wishes,
            seconds=time.perf_counter() - started,
        )
        if wishes or any(isinstance(ev, Stuck) for ev in events):
            raise StuckProof(transcript)
        return transcript

    def _worker_args(self) -> dict:
        return {
            "target": self.target,
            "hints": dict(self.hints.entries),
            "policy": self.policy,
            "threshold": self.threshold,
            "abundancy_rule": self.abundancy_rule,
        }


def _wish_list(stuck: Iterable[str]) -> list[str]:
    return sorted(set(stuck), key=lambda w: (len(w), w))


def _resolve(items: list, search: ProofSearch) -> list:
    out: list = []
    for item in items:
        if isinstance(item, Future):
            events, stuck = item.result()
            search.stuck.extend(stuck)
            out.extend(events)
        else:
            out.append(item)
    return out


_WORKER: Optional[ProofSearch] = None


def _worker_init(args: dict) -> None:
    global _WORKER
    _WORKER = ProofSearch(
        args["target"],
        HintsDB(args["hints"]),
        args["policy"],
        threshold=args["threshold"],
        abundancy_rule=args["abundancy_rule"],
    )


def _worker_refute(state: BranchState, q: int, e: int, depth: int):
    assert _WORKER is not None
    _WORKER.stuck = []
    events = list(_WORKER.refute_assignment(state, q, e, depth))
    return events, list(_WORKER.stuck)


def prove_min_omega(
    K: int,
    hints: Optional[HintsDB] = None,
    policy: Optional[EffortPolicy] = None,
    **options,
) -> Transcript:
    """Prove ``Omega(N) >= K`` for any odd perfect number ``N``.

    Raises :class:`StuckProof` when some Cohen-Sorli interval is too wide;
    the exception carries the partial transcript and its wish list.
    """
    return ProofSearch(K, hints, policy, **options).run()
