"""Regenerate a published transcript fragment line by line from the engine.

``data/golden_fragment.txt`` is the fragment exactly as typeset: rows are
marked ``(1)`` .. ``(5)`` or ``(*)`` in the left margin, elisions are shown as
dots, long rows are wrapped at 80 columns, and the printer left a trailing
blank after the last factor.  ``normalise`` undoes exactly those layout
changes and nothing else.
"""

from __future__ import annotations

import re
from pathlib import Path

import pytest

from omegabound.arith import sigma_prime_power
from omegabound.factor import EffortPolicy, HintsDB
from omegabound.prooflog import Assign, CSEnd
from omegabound.search import BranchState, ProofSearch, check_omega_bound, check_prime_count

FRAGMENT = Path(__file__).parent / "data" / "golden_fragment.txt"
P = 19256021298645399074821884828797791764310604858317
# Factors that no bounded rho run finds; supplied the way a hints file would.
HINTS = HintsDB(
    {
        sigma_prime_power(P, 2): (3081128010533825683, 143739375561423904832226409),
        sigma_prime_power(331, 18): (282349518620419,),
    }
)
# Trial division only: the fragment's "c_1775" is sigma(P^36) with no
# factor found at all.
NO_RHO = EffortPolicy(rho_iteration_cap=1, rho_restart_count=1)
PHRASES = ("It would", "By Cohen", "Trying", "Next prime", "Finished")


def normalise(text: str) -> list[str]:
    out: list[str] = []
    for raw in text.splitlines():
        line = re.sub(r"^\((?:\d|\*)\)", "   ", raw).rstrip()
        body = line.strip()
        if not body or set(body) == {"."}:
            continue
        if "=>" not in body and not body.startswith(PHRASES):
            out[-1] = f"{out[-1]} {body}"  # wrapped continuation
            continue
        # A trailing blank after the factor list plus the two-space tag
        # separator shows up as three spaces.
        out.append(re.sub(r"(?<=\S)   (?=\S)", "  ", line))
    return out


def show(ev) -> str:
    return "  " * ev.depth + ev.text()


def walk(search: ProofSearch, path) -> BranchState:
    state = search.root_state()
    for q, e in path:
        _, state, found = search._settle_assignment(state, q, e, quick=False)
        assert found is None, (q, e, found)
    return state


def first(search: ProofSearch, path, q: int, e: int, n: int = 1) -> list:
    """The first ``n`` events of the subtree for ``q^e`` below ``path``."""
    events = search.refute_assignment(walk(search, path), q, e, len(path))
    return [next(events) for _ in range(n)]


def first_leaf(search: ProofSearch, q: int, e: int) -> list:
    out = []
    for ev in search.refute_assignment(search.root_state(), q, e, 0):
        out.append(ev)
        if isinstance(ev, Assign) and ev.tag:
            return out
    raise AssertionError("subtree has no leaf")


SEVENTEEN_PATH = [(3, 6), (1093, 1), (547, 18), (P, 36)]
TAIL = [(3, 6), (1093, 2), (398581, 4), (5, 10), (1866871, 2), (19, 16), (331, 18)]


def engine_fragment_lines() -> list[str]:
    # Omega(N) >= 75, so B = 73.
    s = ProofSearch(75, HINTS, abundancy_rule="parity")
    slow = ProofSearch(75, HINTS, NO_RHO, abundancy_rule="parity")
    events = first_leaf(s, 3, 6)
    events += first(s, [(3, 6), (1093, 1)], 547, 18)
    events += first(s, [(3, 6), (1093, 1), (547, 18)], P, 2)
    # P^36, wish, interval, "Trying", "Next prime to try is 5", "5^2  => 31".
    events += first(slow, [(3, 6), (1093, 1), (547, 18)], P, 36, n=6)
    leaf = first(slow, SEVENTEEN_PATH, 17, 8)[0]
    events.append(Assign(leaf.depth, leaf.prime, leaf.exponent, leaf.factors, "violate omega bound"))
    events.append(CSEnd(4))
    events += first(s, [(3, 6)], 1093, 2)
    events += first(s, [(3, 6), (1093, 2)], 398581, 1)
    events += first(s, [(3, 6), (1093, 2)], 398581, 4)
    events += first(s, TAIL[:3], 5, 1)
    events += first(s, TAIL[:3], 5, 10)
    events += first(s, TAIL[:4], 1866871, 2)
    events += first(s, TAIL[:5], 19, 2)
    events += first(s, TAIL[:5], 19, 16)
    events += first(s, TAIL[:6], 331, 2)
    events += first(s, TAIL[:6], 331, 18)
    events += first(s, TAIL, 3044803, 2)
    events += first(s, TAIL, 3044803, 4)
    return [show(ev) for ev in events]


def expected_fragment_lines() -> list[str]:
    return normalise(FRAGMENT.read_text())


@pytest.fixture(scope="module")
def engine_lines() -> list[str]:
    return engine_fragment_lines()


def test_fragment_matches_line_by_line(engine_lines):
    expected = expected_fragment_lines()
    assert len(engine_lines) == len(expected)
    for got, want in zip(engine_lines, expected):
        assert got == want


@pytest.mark.parametrize(
    "line",
    [
        "3^6  => 1093",
        "            67^2  => 3 7^2 31  xs=7",
        "          19^2  => 3 127  S=2.001549342",
        "            331^2  => 3 7 5233  S=2.310779791",
        f"      {P}^36  => c_1775",
        "              3044803^2  => 3 3090276117871  exponent bounds exceeded",
        "              3044803^4  => 11 631 12382686952067349629581  xs=prime",
        "        By Cohen/Sorli's argument, N has a prime factor between 3 and 18",
    ],
)
def test_key_lines(engine_lines, line):
    assert line in engine_lines


def test_first_leaf_independent_of_rule():
    for rule in ("multiplicity", "parity"):
        events = first_leaf(ProofSearch(75, abundancy_rule=rule), 3, 6)
        assert [show(ev) for ev in events][-1] == "            67^2  => 3 7^2 31  xs=7"


def test_seventeen_leaf_state():
    """Both the counting test and the omega test refute the 17^8 leaf; the
    fixed check order reports the count first."""
    s = ProofSearch(75, HINTS, NO_RHO, abundancy_rule="parity")
    state = walk(s, SEVENTEEN_PATH)
    for q in (5, 7, 11, 13):
        state = state.forbid(q)
    _, child, found = s._settle_assignment(state, 17, 8, quick=False)
    assert found.tag == "xs=prime"
    assert check_prime_count(child) is not None
    # Rebuild the node without the count failure to reach the omega test.
    trimmed = BranchState(bound=child.bound, assigned=child.assigned, excluded_small=child.excluded_small, forbidden=child.forbidden)
    assert check_omega_bound(trimmed).tag == "violate omega bound"


def test_abundancy_tags_need_parity_rule():
    s = ProofSearch(75, HINTS, abundancy_rule="multiplicity")
    line = show(first(s, TAIL[:5], 19, 2)[0])
    assert not line.endswith("S=2.001549342")
