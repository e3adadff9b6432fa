"""Bounded-effort factorization of divisor sums.

"Easy" here means hints lookup, trial division, then Brent's variant of
Pollard rho under fixed caps.  Anything that survives is handed back as a
composite residual rather than an error; the search knows how to live with
partially factored numbers.
"""

from __future__ import annotations

import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

import gmpy2

from omegabound.arith import is_perfect_power, is_prime, primes_below


class HintsError(ValueError):
    """A hints file line is malformed or names a non-divisor."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class EffortPolicy:
    trial_division_bound: int = 100_000
    rho_iteration_cap: int = 1 << 20
    rho_restart_count: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.trial_division_bound < 2:
            raise ValueError("trial_division_bound must be at least 2")
        if self.rho_iteration_cap < 1 or self.rho_restart_count < 1:
            raise ValueError("rho caps must be positive")


@dataclass(frozen=True)
class HintsDB:
    """Known factors of hard numbers, keyed by the number itself."""

    entries: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for n, factors in self.entries.items():
            for f in factors:
                if f <= 0 or n % f:
                    raise HintsError(f"hint {f} does not divide {n}")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, n: int) -> bool:
        return n in self.entries

    def factors_of(self, n: int) -> tuple[int, ...]:
        return self.entries.get(n, ())

    def merged(self, other: "HintsDB") -> "HintsDB":
        out: dict[int, tuple[int, ...]] = dict(self.entries)
        for n, fs in other.entries.items():
            out[n] = tuple(dict.fromkeys(out.get(n, ()) + fs))
        return HintsDB(out)


_HINT_LINE = re.compile(r"^\s*(\d+)\s*:\s*((?:\d+\s*)*)$")


def parse_hints(text: str) -> HintsDB:
    entries: dict[int, list[int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HINT_LINE.match(line)
        if not m:
            raise HintsError(f"cannot parse {raw.strip()!r}", lineno)
        n = int(m.group(1))
        factors = [int(tok) for tok in m.group(2).split()]
        for f in factors:
            if f <= 1 or n % f:
                raise HintsError(f"{f} does not divide {n}", lineno)
        bucket = entries.setdefault(n, [])
        bucket.extend(f for f in factors if f not in bucket)
    return HintsDB({n: tuple(fs) for n, fs in entries.items()})


def load_hints(source: Union[str, Path, None]) -> HintsDB:
    """Read a hints file of ``"<n>: <f1> <f2> ..."`` lines."""
    if source is None:
        return HintsDB()
    return parse_hints(Path(source).read_text(encoding="utf-8"))


def format_hints(db: HintsDB) -> str:
    return "".join(
        f"{n}: {' '.join(map(str, fs))}\n" for n, fs in sorted(db.entries.items())
    )


@dataclass(frozen=True)
class PartialFactorization:
    """``input == prod(p**k for p, k in prime_factors) * residual**residual_exponent``.

    ``residual`` is composite, not a perfect power, and coprime to every
    listed prime.
    """

    input: int
    prime_factors: tuple[tuple[int, int], ...]
    residual: Optional[int] = None
    residual_exponent: int = 1

    @property
    def complete(self) -> bool:
        return self.residual is None

    def product(self) -> int:
        out = 1
        for p, k in self.prime_factors:
            out *= p**k
        if self.residual is not None:
            out *= self.residual**self.residual_exponent
        return out

    def multiplicity(self, p: int) -> int:
        return dict(self.prime_factors).get(p, 0)

    def tokens(self) -> list[str]:
        out = [str(p) if k == 1 else f"{p}^{k}" for p, k in self.prime_factors]
        if self.residual is not None:
            tok = f"c_{len(str(self.residual))}"
            if self.residual_exponent > 1:
                tok += f"^{self.residual_exponent}"
            out.append(tok)
        return out

    def __str__(self) -> str:
        return " ".join(self.tokens())


@lru_cache(maxsize=8)
def _trial_primes(bound: int) -> tuple[tuple[int, tuple[int, ...]], ...]:
    # Blocks of primes with their product, so one gcd skips a whole block.
    primes = primes_below(bound + 1)
    blocks = []
    for i in range(0, len(primes), 64):
        chunk = tuple(primes[i : i + 64])
        blocks.append((math.prod(chunk), chunk))
    return tuple(blocks)


def trial_divide(n: int, bound: int) -> tuple[Counter, int]:
    found: Counter = Counter()
    for block_product, chunk in _trial_primes(bound):
        if n == 1:
            break
        if math.gcd(n, block_product) == 1:
            continue
        for p in chunk:
            while n % p == 0:
                n //= p
                found[p] += 1
    return found, n


def pollard_brent(n: int, rng: random.Random, iteration_cap: int) -> Optional[int]:
    """One Brent-rho attempt; returns a proper factor of ``n`` or ``None``."""
    if n % 2 == 0:
        return 2
    n = gmpy2.mpz(n)
    y = gmpy2.mpz(rng.randrange(1, n))
    c = gmpy2.mpz(rng.randrange(1, n))
    m = 128
    g = r = q = 1
    x = ys = y
    steps = 0
    while g == 1:
        x = y
        for _ in range(r):
            y = (y * y + c) % n
        k = 0
        while k < r and g == 1:
            ys = y
            for _ in range(min(m, r - k)):
                y = (y * y + c) % n
                q = q * abs(x - y) % n
            g = gmpy2.gcd(q, n)
            k += m
        steps += r
        r *= 2
        if steps > iteration_cap:
            return None
    if g == n:
        # Batched gcd overshot; replay one step at a time.
        while True:
            ys = (ys * ys + c) % n
            g = gmpy2.gcd(abs(x - ys), n)
            if g > 1:
                break
    return int(g) if 1 < g < n else None


def _split(n: int, hints: HintsDB, policy: EffortPolicy, rng: random.Random) -> Optional[int]:
    for f in hints.factors_of(n):
        g = math.gcd(f, n)
        if 1 < g < n:
            return g
    for _ in range(policy.rho_restart_count):
        d = pollard_brent(n, rng, policy.rho_iteration_cap)
        if d is not None:
            return d
    return None


def factor_easy(
    n: int, hints: Optional[HintsDB] = None, policy: Optional[EffortPolicy] = None
) -> PartialFactorization:
    """Factor ``n`` as far as hints, trial division and capped rho allow.

    >>> str(factor_easy(270))
    '2 3^3 5'
    """
    if n < 1:
        raise ValueError("n must be positive")
    hints = hints or HintsDB()
    policy = policy or EffortPolicy()
    rng = random.Random(f"{policy.seed}:{n}")
    primes: Counter = Counter()
    leftovers: Counter = Counter()

    # Hints first, recursively: a key's factors refine every piece of it,
    # and each resulting piece is looked up again in turn.
    pieces: Counter = Counter({n: 1})
    queue = [n]
    while queue:
        m = queue.pop()
        if m not in hints or pieces[m] == 0:
            continue
        k = pieces.pop(m)
        # Hinted factors divide m, so m is a product of powers of the
        # coprime base they generate together.
        for b in coprime_base(dict.fromkeys((m, *hints.factors_of(m)), 1)):
            e = _valuation(m, b)
            if e:
                pieces[b] += e * k
                if b != m:
                    queue.append(b)

    work: list[tuple[int, int]] = []
    for m, k in sorted(pieces.items()):
        found, rest = trial_divide(m, policy.trial_division_bound)
        for p, e in found.items():
            primes[p] += e * k
        if rest > 1:
            work.append((rest, k))

    while work:
        m, k = work.pop()
        if m == 1:
            continue
        if is_prime(m):
            primes[m] += k
            continue
        pp = is_perfect_power(m)
        if pp is not None:
            work.append((pp[0], k * pp[1]))
            continue
        d = _split(m, hints, policy, rng)
        if d is None:
            leftovers[m] += k
            continue
        work.append((d, k))
        work.append((m // d, k))

    # Capped rho follows a different path on hint-split pieces and can miss
    # what it finds on n itself, so a hint must not lose those primes.
    if pieces != Counter({n: 1}) and leftovers:
        for p, _ in factor_easy(n, policy=policy).prime_factors:
            primes.setdefault(p, 0)

    # Leftovers from different pieces may share factors with each other or
    # with primes found elsewhere; settle them to a coprime, screened set.
    while leftovers:
        dirty = False
        settled: Counter = Counter()
        for b, k in coprime_base(leftovers).items():
            for p in list(primes):
                while b % p == 0:
                    b //= p
                    primes[p] += k
                    dirty = True
            if b == 1:
                continue
            if is_prime(b):
                primes[b] += k
                dirty = True
                continue
            pp = is_perfect_power(b)
            if pp is not None:
                settled[pp[0]] += k * pp[1]
                dirty = True
                continue
            settled[b] += k
        if not dirty and settled == leftovers:
            break
        leftovers = settled

    residual = None
    residual_exponent = 1
    if leftovers:
        product = math.prod(c**k for c, k in leftovers.items())
        pp = is_perfect_power(product)
        residual, residual_exponent = pp if pp is not None else (product, 1)

    return PartialFactorization(
        input=n,
        prime_factors=tuple(sorted((p, k) for p, k in primes.items() if k)),
        residual=residual,
        residual_exponent=residual_exponent,
    )


def _valuation(n: int, b: int) -> int:
    e = 0
    while n % b == 0:
        n //= b
        e += 1
    return e


def coprime_base(pieces: Mapping[int, int]) -> dict[int, int]:
    """Rewrite ``prod(b**k)`` over pairwise-coprime bases, merging exponents."""
    items = Counter({b: k for b, k in pieces.items() if b > 1})
    changed = True
    while changed:
        changed = False
        bases = sorted(items)
        for i, a in enumerate(bases):
            for b in bases[i + 1 :]:
                g = math.gcd(a, b)
                if g == 1:
                    continue
                ka, kb = items.pop(a), items.pop(b)
                for part, k in ((a // g, ka), (b // g, kb), (g, ka + kb)):
                    if part > 1:
                        items[part] += k
                changed = True
                break
            if changed:
                break
    return dict(items)


def split_by_gcd(residuals: Iterable[int], known_primes: Iterable[int]) -> list[int]:
    """Make residuals pairwise coprime and coprime to ``known_primes``.

    Known primes are divided out completely; shared factors between
    residuals become separate pieces.  The caller re-screens the pieces for
    primality and perfect powers.
    """
    known = sorted(set(known_primes))
    stripped: Counter = Counter()
    for c in residuals:
        for p in known:
            while c % p == 0:
                c //= p
        if c > 1:
            stripped[c] += 1
    return sorted(coprime_base(stripped))
