"""Command-line entry point: ``omegabound prove|verify|factor|hints-check``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from omegabound.factor import EffortPolicy, HintsError, factor_easy, load_hints
from omegabound.prooflog import render, verify
from omegabound.search import (
    ABUNDANCY_RULES,
    CAPSTONE_OMEGA,
    DEFAULT_THRESHOLD,
    ProofSearch,
    StuckProof,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


@dataclass
class RunConfig:
    target_K: int
    hints_path: Optional[Path] = None
    effort: EffortPolicy = field(default_factory=EffortPolicy)
    jobs: int = 1
    output_path: Optional[Path] = None
    smallness_threshold: int = DEFAULT_THRESHOLD
    abundancy_rule: str = "multiplicity"

    def __post_init__(self) -> None:
        if self.target_K % 2 == 0 or not 9 <= self.target_K <= CAPSTONE_OMEGA:
            raise ValueError(f"--target must be odd and between 9 and {CAPSTONE_OMEGA}")
        if self.jobs < 1:
            raise ValueError("--jobs must be at least 1")
        if self.smallness_threshold < 4:
            raise ValueError("--small-threshold must be at least 4")

    @property
    def seed(self) -> int:
        return self.effort.seed


def cmd_prove(config: RunConfig) -> int:
    hints = load_hints(config.hints_path)
    search = ProofSearch(
        config.target_K,
        hints,
        config.effort,
        threshold=config.smallness_threshold,
        abundancy_rule=config.abundancy_rule,
        jobs=config.jobs,
    )
    out = config.output_path or Path(f"omega-{config.target_K}.txt")
    try:
        transcript = search.run()
    except StuckProof as exc:
        transcript = exc.transcript
        out.write_text(render(transcript), encoding="utf-8")
        print(f"stuck: Omega(N) >= {config.target_K} not proved; partial transcript in {out}", file=sys.stderr)
        print("factorizations needed:", file=sys.stderr)
        for wish in transcript.wishes:
            print(f"  {wish}", file=sys.stderr)
        return EXIT_FAILED
    out.write_text(render(transcript), encoding="utf-8")
    print(
        f"proved Omega(N) >= {config.target_K}: {transcript.line_count:,} lines "
        f"in {transcript.seconds:.2f} s -> {out}"
    )
    return EXIT_OK


def cmd_verify(path: Path) -> int:
    if not path.exists():
        print(f"error: {path} does not exist", file=sys.stderr)
        return EXIT_USAGE
    report = verify(path.read_text(encoding="utf-8"))
    if report.ok:
        print(f"{path}: {report}")
        return EXIT_OK
    print(f"{path}: verification failed at {report}", file=sys.stderr)
    return EXIT_FAILED


def cmd_factor(n: int, hints_path: Optional[Path] = None, effort: Optional[EffortPolicy] = None) -> int:
    f = factor_easy(n, load_hints(hints_path), effort)
    print(str(f) or "1")
    if f.residual is not None:
        print(f"c_{len(str(f.residual))} = {f.residual}")
    return EXIT_OK


def cmd_hints_check(path: Path) -> int:
    try:
        db = load_hints(path)
    except HintsError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    print(f"{path}: {len(db)} entries OK")
    return EXIT_OK


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omegabound", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    effort = argparse.ArgumentParser(add_help=False)
    effort.add_argument("--hints", type=Path, default=None, help="hints file of known factors")
    effort.add_argument("--trial-bound", type=_positive, default=EffortPolicy.trial_division_bound)
    effort.add_argument("--rho-cap", type=_positive, default=EffortPolicy.rho_iteration_cap)
    effort.add_argument("--rho-restarts", type=_positive, default=EffortPolicy.rho_restart_count)
    effort.add_argument("--seed", type=int, default=EffortPolicy.seed)

    prove = sub.add_parser("prove", parents=[effort], help="prove Omega(N) >= K")
    prove.add_argument("--target", type=int, required=True, help="odd K, 9 <= K <= 81")
    prove.add_argument("--jobs", type=_positive, default=1)
    prove.add_argument("--out", type=Path, default=None)
    prove.add_argument("--small-threshold", type=_positive, default=DEFAULT_THRESHOLD)
    prove.add_argument("--abundancy-rule", choices=ABUNDANCY_RULES, default="multiplicity")

    check = sub.add_parser("verify", help="re-check a transcript")
    check.add_argument("path", type=Path)

    fac = sub.add_parser("factor", parents=[effort], help="easy-factor one number")
    fac.add_argument("n", type=_positive)

    hints = sub.add_parser("hints-check", help="validate a hints file")
    hints.add_argument("path", type=Path)
    return parser


def _effort(args: argparse.Namespace) -> EffortPolicy:
    return EffortPolicy(
        trial_division_bound=max(args.trial_bound, 2),
        rho_iteration_cap=args.rho_cap,
        rho_restart_count=args.rho_restarts,
        seed=args.seed,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "prove":
            config = RunConfig(
                target_K=args.target,
                hints_path=args.hints,
                effort=_effort(args),
                jobs=args.jobs,
                output_path=args.out,
                smallness_threshold=args.small_threshold,
                abundancy_rule=args.abundancy_rule,
            )
            return cmd_prove(config)
        if args.command == "verify":
            return cmd_verify(args.path)
        if args.command == "factor":
            return cmd_factor(args.n, args.hints, _effort(args))
        return cmd_hints_check(args.path)
    except (ValueError, HintsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
