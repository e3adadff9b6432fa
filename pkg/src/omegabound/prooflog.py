"""Proof transcripts: rendering, parsing and an independent checker.

A transcript body is an indented tree.  Each assignment line reads
``p^a  => f1 f2 ...`` (the factorization of ``sigma(p^a)``), optionally
followed by a contradiction tag; its children sit two spaces deeper.  The
checker rebuilds every hypothesis from the lines alone, recomputes each
divisor sum and each contradiction, and insists every branch point lists
its complete candidate set.  It shares only the primitives in
:mod:`omegabound.arith` with the search.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Union

from omegabound.arith import (
    format_decimal,
    is_perfect_power,
    is_prime,
    sigma_prime_power,
    sii_prime_power,
)

INDENT = "  "


@dataclass(frozen=True)
class Assign:
    depth: int
    prime: int
    exponent: int
    factors: tuple[str, ...]
    tag: Optional[str] = None

    def text(self) -> str:
        head = str(self.prime) if self.exponent == 1 else f"{self.prime}^{self.exponent}"
        line = f"{head}  => {' '.join(self.factors)}"
        return f"{line}  {self.tag}" if self.tag else line


@dataclass(frozen=True)
class Wish:
    depth: int
    prime: int
    exponent: int

    def text(self) -> str:
        pp = str(self.prime) if self.exponent == 1 else f"{self.prime}^{self.exponent}"
        return f"It would be nice to know more factors of sigma({pp})"


@dataclass(frozen=True)
class CSStart:
    depth: int
    lower: int
    upper: int

    def text(self) -> str:
        return f"By Cohen/Sorli's argument, N has a prime factor between {self.lower} and {self.upper}"


@dataclass(frozen=True)
class CSTrying:
    depth: int

    def text(self) -> str:
        return "Trying each one in turn"


@dataclass(frozen=True)
class CSTry:
    depth: int
    prime: int

    def text(self) -> str:
        return f"Next prime to try is {self.prime}"


@dataclass(frozen=True)
class CSEnd:
    depth: int

    def text(self) -> str:
        return "Finished Cohen/Sorli's argument"


@dataclass(frozen=True)
class Stuck:
    depth: int
    lower: int
    upper: int

    def text(self) -> str:
        return f"Cannot enumerate: N has a prime factor between {self.lower} and {self.upper}"


ProofEvent = Union[Assign, Wish, CSStart, CSTrying, CSTry, CSEnd, Stuck]


def cs_render_bounds(lower: Fraction, upper: Fraction) -> tuple[int, int]:
    """Integer endpoints for display: ``floor(lower) <= q < ceil(upper)``."""
    return math.floor(lower), math.ceil(upper)


@dataclass
class Transcript:
    target: int
    events: list
    config: dict = field(default_factory=dict)
    wishes: list = field(default_factory=list)
    seconds: float = 0.0
    digest: Optional[str] = None

    def __post_init__(self) -> None:
        if self.digest is None and self.config:
            from omegabound.search import config_digest

            self.digest = config_digest(self.config)

    @property
    def bound(self) -> int:
        return self.target - 2

    @property
    def threshold(self) -> int:
        return int(self.config.get("small_threshold", 100_000))

    @property
    def abundancy_rule(self) -> str:
        return str(self.config.get("abundancy_rule", "multiplicity"))

    @property
    def line_count(self) -> int:
        return len(self.events)

    @property
    def complete(self) -> bool:
        return not self.wishes and not any(isinstance(ev, Stuck) for ev in self.events)


def render_body(events: Iterable[ProofEvent]) -> str:
    return "".join(f"{INDENT * ev.depth}{ev.text()}\n" for ev in events)


def render(t: Transcript) -> str:
    header = [
        "# omegabound transcript",
        f"# K={t.target} B={t.bound}",
        f"# config={t.digest} small-threshold={t.threshold} abundancy-rule={t.abundancy_rule}",
        f"# lines={t.line_count}",
        f"# status={'complete' if t.complete else 'stuck'}",
    ]
    header += [f"# WISH {w}" for w in t.wishes]
    return "\n".join(header) + "\n" + render_body(t.events)


class TranscriptParseError(ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


_ASSIGN = re.compile(r"^(\d+)(?:\^(\d+))?  => (\S+(?: \S+)*?)(?:  (\S.*))?$")
_FACTOR = re.compile(r"^(?:\d+|c_\d+)(?:\^\d+)?$")
_WISH = re.compile(r"^It would be nice to know more factors of sigma\((\d+)(?:\^(\d+))?\)$")
_CS_START = re.compile(r"^By Cohen/Sorli's argument, N has a prime factor between (-?\d+) and (-?\d+)$")
_CS_TRY = re.compile(r"^Next prime to try is (\d+)$")
_STUCK = re.compile(r"^Cannot enumerate: N has a prime factor between (-?\d+) and (-?\d+)$")


def parse_line(raw: str, lineno: int) -> ProofEvent:
    stripped = raw.lstrip(" ")
    indent = len(raw) - len(stripped)
    if indent % 2 or not stripped or stripped != stripped.rstrip():
        raise TranscriptParseError(lineno, "bad indentation or whitespace")
    depth = indent // 2
    m = _ASSIGN.match(stripped)
    if m:
        factors = tuple(m.group(3).split(" "))
        if not all(_FACTOR.match(tok) for tok in factors):
            raise TranscriptParseError(lineno, f"bad factor list {m.group(3)!r}")
        exponent = int(m.group(2)) if m.group(2) else 1
        if m.group(2) and exponent == 1:
            raise TranscriptParseError(lineno, "exponent 1 must be written bare")
        return Assign(depth, int(m.group(1)), exponent, factors, m.group(4))
    m = _WISH.match(stripped)
    if m:
        return Wish(depth, int(m.group(1)), int(m.group(2)) if m.group(2) else 1)
    m = _CS_START.match(stripped)
    if m:
        return CSStart(depth, int(m.group(1)), int(m.group(2)))
    if stripped == "Trying each one in turn":
        return CSTrying(depth)
    m = _CS_TRY.match(stripped)
    if m:
        return CSTry(depth, int(m.group(1)))
    if stripped == "Finished Cohen/Sorli's argument":
        return CSEnd(depth)
    m = _STUCK.match(stripped)
    if m:
        return Stuck(depth, int(m.group(1)), int(m.group(2)))
    raise TranscriptParseError(lineno, f"unrecognised line {stripped[:60]!r}")


_HEADER_KEYS = {"K", "B", "config", "small-threshold", "abundancy-rule", "lines", "status"}


def parse(text: str) -> Transcript:
    """Inverse of :func:`render`."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TranscriptParseError(1, "empty transcript")
    header: dict[str, str] = {}
    wishes: list[str] = []
    events: list = []
    body_start = None
    for i, raw in enumerate(lines, start=1):
        if raw.startswith("# ") and body_start is None:
            rest = raw[2:]
            if rest.startswith("WISH "):
                wishes.append(rest[5:])
                continue
            for tok in rest.split():
                key, sep, value = tok.partition("=")
                if sep and key in _HEADER_KEYS:
                    header[key] = value
            continue
        if body_start is None:
            body_start = i
        events.append(parse_line(raw, i))
    for key in ("K", "B", "small-threshold", "abundancy-rule", "lines"):
        if key not in header:
            raise TranscriptParseError(1, f"header is missing {key}")
    try:
        target = int(header["K"])
        threshold = int(header["small-threshold"])
        declared_lines = int(header["lines"])
        declared_bound = int(header["B"])
    except ValueError as exc:
        raise TranscriptParseError(1, f"bad header value: {exc}") from None
    if declared_bound != target - 2:
        raise TranscriptParseError(1, f"B={declared_bound} does not match K={target}")
    t = Transcript(
        target=target,
        events=events,
        config={"small_threshold": threshold, "abundancy_rule": header["abundancy-rule"]},
        wishes=wishes,
        digest=header.get("config"),
    )
    t.declared_lines = declared_lines  # type: ignore[attr-defined]
    t.body_start = body_start or len(lines) + 1  # type: ignore[attr-defined]
    return t


# ---------------------------------------------------------------------------
# Independent checker


@dataclass
class VerificationReport:
    ok: bool
    line: Optional[int] = None
    reason: str = ""
    lines_checked: int = 0

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return f"sound: {self.lines_checked} lines verified"
        return f"line {self.line}: {self.reason}"


class _Reject(Exception):
    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason


@dataclass
class _Hypothesis:
    """What one transcript path asserts about N, rebuilt line by line."""

    bound: int
    exps: dict = field(default_factory=dict)
    forced: Counter = field(default_factory=Counter)
    composites: Counter = field(default_factory=Counter)
    banned: frozenset = frozenset()
    out_small: frozenset = frozenset()
    partial: tuple = ()

    def copy(self, **changes) -> "_Hypothesis":
        data = dict(
            bound=self.bound,
            exps=dict(self.exps),
            forced=Counter(self.forced),
            composites=Counter(self.composites),
            banned=self.banned,
            out_small=self.out_small,
            partial=self.partial,
        )
        data.update(changes)
        return _Hypothesis(**data)

    def room(self) -> int:
        return self.bound - sum(self.exps.values())

    def odd_slot_used(self) -> bool:
        return any(a % 2 for a in self.exps.values())

    def open_primes(self) -> list[int]:
        return sorted(p for p, k in self.forced.items() if k > 0 and p not in self.exps)

    def most_new_primes(self) -> int:
        room = self.room()
        if room <= 0:
            return 0
        # one exponent-1 prime (if the odd slot is free) and the rest squared
        return (room + 1) // 2 if not self.odd_slot_used() else room // 2

    def exponent_choices(self, q: int) -> list[int]:
        low = max(1, self.forced.get(q, 0))
        odd_ok = q % 4 == 1 and not self.odd_slot_used()
        out = []
        for e in range(low, self.room() + 1):
            if e % 2 == 0:
                out.append(e)
            elif odd_ok and e % 4 == 1:
                out.append(e)
        return out


def _known_abundancy(h: _Hypothesis) -> Fraction:
    num, den = 1, 1
    for p, a in h.exps.items():
        num *= sigma_prime_power(p, a)
        den *= p**a
    return Fraction(num, den)


def _settle(h: _Hypothesis) -> None:
    """Split composites against each other and every named prime, in place."""
    while True:
        named = set(h.exps) | set(h.forced) | set(h.banned)
        progress = False
        comps = Counter()
        for c, k in h.composites.items():
            for p in named:
                while c % p == 0:
                    c //= p
                    h.forced[p] += k
                    progress = True
            if c > 1:
                comps[c] += k
        # pairwise gcd refinement
        items = list(comps.items())
        i = 0
        while i < len(items):
            j = i + 1
            while j < len(items):
                (a, ka), (b, kb) = items[i], items[j]
                g = math.gcd(a, b)
                if g > 1:
                    progress = True
                    items.pop(j)
                    items.pop(i)
                    items.extend((x, k) for x, k in ((a // g, ka), (b // g, kb), (g, ka + kb)) if x > 1)
                    i, j = 0, 1
                    continue
                j += 1
            i += 1
        merged: Counter = Counter()
        for c, k in items:
            merged[c] += k
        h.composites = Counter()
        for c, k in merged.items():
            if is_prime(c):
                h.forced[c] += k
                progress = True
                continue
            root = is_perfect_power(c)
            if root is not None:
                h.composites[root[0]] += k * root[1]
                progress = True
            else:
                h.composites[c] += k
        if not progress:
            return


def _expected_tag(h: _Hypothesis, rule: str) -> Optional[str]:
    over = [p for p, a in h.exps.items() if h.forced.get(p, 0) > a]
    over += [p for p in h.banned if h.forced.get(p, 0) > 0]
    if over:
        return f"xs={min(over)}"
    open_primes = h.open_primes()
    want = len(open_primes) + 2 * len(h.composites)
    if want == 0 and _known_abundancy(h) != 2:
        want = 1
    if want > h.most_new_primes():
        return "xs=prime"
    if (
        not h.odd_slot_used()
        and not h.composites
        and 2 * len(open_primes) > h.room()
        and all(p % 4 == 3 for p in open_primes)
    ):
        return "exponent bounds exceeded"
    s = _known_abundancy(h)
    odd_owner = next((p for p, a in h.exps.items() if a % 2), None)
    for p in open_primes:
        m = max(1, h.forced[p])
        if rule == "parity" and m % 2 and (p % 4 == 3 or odd_owner is not None):
            m += 1
        s *= sii_prime_power(p, m)
    for c in h.composites:
        s *= 1 + Fraction(1, c)
    if s > 2:
        return f"S={format_decimal(s)}"
    gone = h.banned | h.out_small
    need = 8
    for p, t in ((3, 11), (5, 15), (7, 27), (11, 41)):
        if p not in gone:
            break
        need = t
    if len(h.exps) + h.most_new_primes() < need:
        return "violate omega bound"
    return None


def _check_factor_line(ev: Assign, index: int) -> tuple[Counter, Optional[tuple[int, int]]]:
    p, e = ev.prime, ev.exponent
    total = sigma_prime_power(p, e)
    primes: Counter = Counter()
    residual_tok = None
    previous = 0
    for tok in ev.factors:
        base, _, power = tok.partition("^")
        k = int(power) if power else 1
        if k < 1 or (power and k == 1):
            raise _Reject(index, f"bad multiplicity in {tok}")
        if base.startswith("c_"):
            if residual_tok is not None:
                raise _Reject(index, "more than one residual")
            residual_tok = (int(base[2:]), k)
            continue
        if residual_tok is not None:
            raise _Reject(index, "residual must come last")
        q = int(base)
        if q <= previous:
            raise _Reject(index, "factors not strictly increasing")
        previous = q
        if not is_prime(q):
            raise _Reject(index, f"{q} is not prime")
        primes[q] = k
    rest = total
    for q, k in primes.items():
        if rest % q**k:
            raise _Reject(index, f"{q}^{k} does not divide sigma({p}^{e})")
        rest //= q**k
        if rest % q == 0:
            raise _Reject(index, f"multiplicity of {q} understated")
    residual = None
    if residual_tok is None:
        if rest != 1:
            raise _Reject(index, f"factors of sigma({p}^{e}) incomplete")
    else:
        digits, k = residual_tok
        root = is_perfect_power(rest)
        base, power = root if root is not None else (rest, 1)
        if rest == 1 or power != k or len(str(base)) != digits or is_prime(base):
            raise _Reject(index, "residual does not match")
        residual = (base, k)
    twos = primes.get(2, 0)
    if twos > 1 or (twos == 1 and e % 2 == 0):
        raise _Reject(index, "N would be even")
    return primes, residual


class _Checker:
    def __init__(self, t: Transcript):
        self.events = t.events
        self.bound = t.bound
        self.rule = t.abundancy_rule
        self.threshold = t.threshold
        self.pos = 0

    def peek(self) -> Optional[ProofEvent]:
        return self.events[self.pos] if self.pos < len(self.events) else None

    def take(self, kind: type, depth: int, what: str):
        ev = self.peek()
        if ev is None:
            raise _Reject(len(self.events), f"transcript ends; expected {what}")
        if not isinstance(ev, kind) or ev.depth != depth:
            raise _Reject(self.pos, f"incomplete candidate set: expected {what}")
        self.pos += 1
        return ev

    def branch(self, h: _Hypothesis, q: int, depth: int) -> None:
        if q in h.banned or q in h.exps:
            raise _Reject(self.pos, f"{q} cannot be branched on here")
        for e in h.exponent_choices(q):
            ev = self.take(Assign, depth, f"{q}^{e} at depth {depth}")
            if (ev.prime, ev.exponent) != (q, e):
                raise _Reject(self.pos - 1, f"incomplete candidate set: expected {q}^{e}")
            self.assignment(h, ev, depth)

    def assignment(self, h: _Hypothesis, ev: Assign, depth: int) -> None:
        index = self.pos - 1
        primes, residual = _check_factor_line(ev, index)
        child = h.copy()
        child.exps[ev.prime] = ev.exponent
        child.forced[ev.prime] += 0
        for q, k in primes.items():
            if q != 2:
                child.forced[q] += k
        if residual is not None:
            child.composites[residual[0]] += residual[1]
            child.partial = child.partial + ((ev.prime, ev.exponent),)
        _settle(child)
        if not child.composites:
            child.partial = ()
        tag = _expected_tag(child, self.rule)
        if tag != ev.tag:
            raise _Reject(index, f"tag {ev.tag!r} but the hypothesis gives {tag!r}")
        if tag is None:
            self.expand(child, depth + 1)

    def expand(self, h: _Hypothesis, depth: int) -> None:
        open_primes = h.open_primes()
        if open_primes:
            self.branch(h, open_primes[0], depth)
            return
        for p, e in h.partial:
            ev = self.take(Wish, depth, f"wish for sigma({p}^{e})")
            if (ev.prime, ev.exponent) != (p, e):
                raise _Reject(self.pos - 1, "wrong wish line")
        S = _known_abundancy(h)
        r = h.most_new_primes()
        if S >= 2 or r < 1:
            raise _Reject(self.pos, "Cohen-Sorli bound inapplicable")
        lower = max(Fraction(3), S / (2 - S))
        upper = (2 + S * (r - 1)) / (2 - S)
        if r >= 3:
            upper = min(upper, (8 + 2 * S**2 * (r - 1)) / (4 - S**2))
        if upper >= self.threshold:
            raise _Reject(self.pos, "open branch: Cohen-Sorli interval too large")
        ev = self.take(CSStart, depth, "Cohen-Sorli block")
        if (ev.lower, ev.upper) != (math.floor(lower), math.ceil(upper)):
            raise _Reject(self.pos - 1, "wrong Cohen-Sorli interval")
        self.take(CSTrying, depth, "'Trying each one in turn'")
        q = max(3, math.ceil(lower))
        trial = h
        while q < upper:
            if is_prime(q) and q not in trial.banned and q not in trial.exps:
                ev = self.take(CSTry, depth, f"next prime {q}")
                if ev.prime != q:
                    raise _Reject(self.pos - 1, f"incomplete candidate set: expected prime {q}")
                self.branch(trial, q, depth)
                trial = trial.copy(banned=trial.banned | {q})
            q += 1
        self.take(CSEnd, depth, "end of Cohen-Sorli block")

    def run(self) -> None:
        gone: frozenset = frozenset()
        for q in (3, 5, 7, 11):
            root = _Hypothesis(bound=self.bound, banned=gone, out_small=gone)
            self.branch(root, q, 0)
            gone = gone | {q}
        if self.peek() is not None:
            raise _Reject(self.pos, "unexpected extra line")


def verify(source: Union[str, Path, Transcript], hints=None) -> VerificationReport:
    """Re-check a transcript from scratch.

    ``source`` is transcript text, a path, or a :class:`Transcript`.  The
    hints database is not needed (every factor is re-checked by division
    and primality proof) and is accepted only for interface symmetry.
    """
    del hints
    if isinstance(source, Path):
        source = source.read_text(encoding="utf-8")
    try:
        t = parse(source) if isinstance(source, str) else source
    except TranscriptParseError as exc:
        return VerificationReport(False, exc.line, exc.reason)
    offset = getattr(t, "body_start", 1)
    if not 9 <= t.target <= 81 or t.target % 2 == 0:
        return VerificationReport(False, 1, f"K={t.target} outside the provable range")
    if t.wishes or any(isinstance(ev, Stuck) for ev in t.events):
        first = next((i for i, ev in enumerate(t.events) if isinstance(ev, Stuck)), 0)
        return VerificationReport(False, offset + first, "transcript has open branches")
    declared = getattr(t, "declared_lines", t.line_count)
    if declared != t.line_count:
        return VerificationReport(False, 1, f"header claims {declared} lines, body has {t.line_count}")
    checker = _Checker(t)
    try:
        checker.run()
    except _Reject as exc:
        return VerificationReport(False, offset + exc.index, exc.reason, checker.pos)
    return VerificationReport(True, lines_checked=t.line_count)
