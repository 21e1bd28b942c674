"""Command-line entry point.

Exit statuses: 0 success / every requested criterion holds, 1 a criterion
fails, 2 bad input (parse or validation error), 3 non-quiescent history,
4 update count above the checker's search bound.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import checker, history, simnet
from .replica import REPLICA_MODES, make_comparator

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NONQUIESCENT, EXIT_BOUND = 0, 1, 2, 3, 4

FIGURE_CLASSES = {
    "1a": "Not EC and not UC",
    "1b": "EC but not UC",
    "1c": "EC and UC",
}


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    output: str | None = None
    seed: int | None = None
    mode: str = "uc"
    comparator: str = "lamport-pid"
    priority: tuple[int, ...] = ()

    def __post_init__(self):
        if self.mode not in REPLICA_MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        make_comparator(self.comparator, self.priority)


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _figure(name: str) -> str:
    return resources.files("ucrepl").joinpath("figures", name).read_text(encoding="utf-8")


def _read_scenario(path: str) -> simnet.Scenario:
    p = Path(path)
    if not p.exists() and p.parent.name == "figures":
        # bundled figures are addressable as figures/<name>
        return simnet.parse_scenario(_figure(p.name))
    return simnet.load_scenario(p)


def _flag(b: bool) -> str:
    return "true" if b else "false"


def cmd_run(cfg: RunConfig) -> int:
    try:
        sc = _read_scenario(cfg.scenario)
        if cfg.seed is not None:
            sc = sc.with_seed(cfg.seed)
            simnet.validate(sc)
    except (OSError, simnet.ScenarioError) as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT
    comparator = make_comparator(cfg.comparator, cfg.priority)
    res = simnet.simulate(sc, cfg.mode, comparator)
    text = history.serialize(res.history)
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if not res.quiescent:
        _err("warning: survivors remain partitioned; no converged reads recorded")
    return EXIT_OK


def _verdicts(h: history.History, criterion: str, bound: int):
    ec = checker.check_ec(h) if criterion in ("ec", "both") else None
    uc = checker.check_uc(h, bound) if criterion in ("uc", "both") else None
    return ec, uc


def cmd_check(path: str, criterion: str = "both", bound: int = checker.DEFAULT_BOUND) -> int:
    try:
        h = history.parse(Path(path).read_text(encoding="utf-8"))
    except (OSError, history.HistoryError) as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT
    try:
        ec, uc = _verdicts(h, criterion, bound)
    except checker.NonQuiescentHistory as exc:
        _err(f"non-quiescent history: {exc}")
        return EXIT_NONQUIESCENT
    except checker.SearchBoundExceeded as exc:
        _err(f"search bound exceeded: {exc}")
        return EXIT_BOUND
    fields = []
    if ec is not None:
        fields.append(f"EC: {_flag(ec)}")
    if uc is not None:
        fields.append(f"UC: {_flag(uc.holds)}")
    print(", ".join(fields))
    if uc is not None:
        _print_uc_detail(h, uc)
    ok = (ec is None or ec) and (uc is None or uc.holds)
    return EXIT_OK if ok else EXIT_FAIL


def _print_uc_detail(h, uc: checker.UcVerdict) -> None:
    if uc.holds:
        print("witness: " + " ".join(f"{p}:{k}" for p, k in uc.witness))
        print("witness-ops: " + " ".join(checker.witness_ops(h, uc.witness)))
    else:
        print(f"reason: {uc.reason}")


def figure_histories() -> dict[str, history.History]:
    """The three Fig. 1 style histories: two curated, one produced by a UC run."""
    sc = simnet.parse_scenario(_figure("fig1.scn"))
    return {
        "1a": history.parse(_figure("fig1a.hist")),
        "1b": history.parse(_figure("fig1b.hist")),
        "1c": simnet.run(sc, comparator=make_comparator("pid-seq", (2, 1))),
    }


def cmd_demo_figures() -> int:
    rows = []
    ok = True
    details = []
    for name, h in figure_histories().items():
        ec, uc = _verdicts(h, "both", checker.DEFAULT_BOUND)
        got = checker.classify(ec, uc.holds)
        match = got == FIGURE_CLASSES[name]
        ok &= match
        rows.append((name, _flag(ec), _flag(uc.holds), got, "ok" if match else "MISMATCH"))
        if uc.holds:
            details.append(f"{name} witness-ops: " + " ".join(checker.witness_ops(h, uc.witness)))
        elif ec:
            details.append(f"{name} reason: {uc.reason}")
    header = ("figure", "EC", "UC", "class", "match")
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(len(header))]
    for r in [header] + rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    for line in details:
        print(line)
    return EXIT_OK if ok else EXIT_FAIL


def _batch_one(args) -> tuple[int, bool, str]:
    seed, mode, comparator, priority = args
    sc = simnet.random_scenario(seed)
    h = simnet.run(sc, mode, make_comparator(comparator, priority))
    try:
        ec = checker.check_ec(h)
        uc = checker.check_uc(h)
    except checker.CheckError as exc:
        return seed, False, str(exc)
    return seed, ec and uc.holds, checker.classify(ec, uc.holds)


def cmd_batch(seeds: int, start: int = 0, jobs: int = 1, mode: str = "uc",
              comparator: str = "lamport-pid", priority: tuple[int, ...] = ()) -> int:
    work = [(s, mode, comparator, priority) for s in range(start, start + seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_batch_one, work))
    else:
        results = [_batch_one(w) for w in work]
    passed = 0
    for seed, good, label in sorted(results):
        passed += good
        print(f"seed {seed}: {'pass' if good else 'fail'} ({label})")
    print(f"passed {passed} failed {len(results) - passed}")
    return EXIT_OK if passed == len(results) else EXIT_FAIL


def _priority(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ucrepl", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def replica_flags(p):
        p.add_argument("--mode", choices=sorted(REPLICA_MODES), default="uc")
        p.add_argument("--comparator", choices=["lamport-pid", "pid-seq"], default="lamport-pid")
        p.add_argument("--priority", type=_priority, default=(),
                       help="pid-seq only: comma-separated pids, highest priority first")

    p = sub.add_parser("run", help="simulate a scenario and write its history")
    p.add_argument("scenario")
    p.add_argument("-o", "--output")
    p.add_argument("--seed", type=int)
    replica_flags(p)

    p = sub.add_parser("check", help="classify a history file")
    p.add_argument("history")
    p.add_argument("--criterion", choices=["ec", "uc", "both"], default="both")
    p.add_argument("--bound", type=int, default=checker.DEFAULT_BOUND)

    sub.add_parser("demo-figures", help="classify the three Fig. 1 histories")

    p = sub.add_parser("batch", help="run and check random scenarios")
    p.add_argument("-n", "--seeds", type=int, default=100)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("-j", "--jobs", type=int, default=1)
    replica_flags(p)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(RunConfig(args.scenario, args.output, args.seed, args.mode,
                                 args.comparator, args.priority))
    if args.command == "check":
        return cmd_check(args.history, args.criterion, args.bound)
    if args.command == "demo-figures":
        return cmd_demo_figures()
    return cmd_batch(args.seeds, args.start, args.jobs, args.mode, args.comparator,
                     args.priority)


if __name__ == "__main__":
    sys.exit(main())
