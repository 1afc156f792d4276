"""Command-line interface.

Exit codes are uniform across subcommands: 0 for a passing check or a
completed run, 1 for a failed check or protocol violation, 2 for usage,
validation, or capacity errors.  Every randomized command is reproducible
from --seed alone; outputs carry no timestamps.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import concentration, fixtures, harness, hatgame, modelio, nosignalling
from .errors import BellhatError, ContractError, HarnessAbort, ProtocolError

PASS, FAIL, USAGE = 0, 1, 2


def _print(doc: dict) -> None:
    sys.stdout.write(modelio.dumps(doc) + "\n")


def _load_model_arg(path: str):
    # Bare fixture names resolve to the bundled files.
    stem = path.removesuffix(".json")
    if stem in fixtures.NAMES and not Path(path).exists():
        return modelio.load_model(fixtures.fixture_path(stem))
    return modelio.load_model(path)


def cmd_check_ns(args) -> int:
    model = _load_model_arg(args.model)
    check = (nosignalling.is_no_signalling_fast if args.fast
             else nosignalling.is_no_signalling)
    verdict = check(model, tol=args.tol)
    _print(verdict.to_json())
    return PASS if verdict.passed else FAIL


def cmd_check_local(args) -> int:
    model = _load_model_arg(args.model)
    verdict = nosignalling.is_local(model, tol=args.tol)
    _print(verdict.to_json())
    return PASS if verdict.passed else FAIL


def default_checkpoints(n: int) -> list[int]:
    """Geometric ladder 1, 2, 4, ... capped by and always including n."""
    ks = []
    k = 1
    while k < n:
        ks.append(k)
        k *= 2
    ks.append(n)
    return ks


def _parse_checkpoints(text: str | None, n: int) -> list[int]:
    if text is None:
        return default_checkpoints(n)
    if not text.strip():
        return []
    return [int(part) for part in text.split(",")]


def _prepare_out(out: str, force: bool, names: tuple[str, ...]) -> Path:
    directory = Path(out)
    directory.mkdir(parents=True, exist_ok=True)
    for name in names:
        target = directory / name
        if target.exists() and not force:
            raise BellhatError(f"{target} exists; pass --force to overwrite")
    return directory


def cmd_simulate(args) -> int:
    strategy = hatgame.parse_strategy(args.strategy)
    sampler = hatgame.parse_sampler(args.input)
    checkpoints = _parse_checkpoints(args.checkpoints, args.players)
    stats = hatgame.repeat_runs(strategy, sampler, n=args.players,
                                horizon=args.horizon, trials=args.trials,
                                seed=args.seed, checkpoints=checkpoints)
    ratios = [st.win_ratio for st in stats]
    summary = {
        "config": {
            "strategy": strategy.label(), "input": sampler.label(),
            "players": args.players,
            "horizon": args.horizon if args.horizon is not None else args.players,
            "trials": args.trials, "seed": args.seed,
            "checkpoints": checkpoints,
        },
        "trials": [st.to_json() for st in stats],
        "aggregate": {
            "mean_W": sum(ratios) / len(ratios),
            "min_W": min(ratios),
            "max_W": max(ratios),
            "max_last_loss": max((st.last_loss for st in stats
                                  if st.last_loss is not None), default=None),
            "no_loss_trials": sum(1 for st in stats if st.last_loss is None),
        },
    }
    if args.out:
        directory = _prepare_out(args.out, args.force,
                                 ("summary.json", "trajectories.csv"))
        (directory / "summary.json").write_text(
            modelio.dumps(summary) + "\n", encoding="utf-8")
        with (directory / "trajectories.csv").open(
                "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial", "k", "S_k", "W_k"])
            for t, st in enumerate(stats):
                for k, s_k in st.checkpoints:
                    writer.writerow([t, k, s_k, hatgame.win_ratio(s_k, k)])
        sys.stdout.write(f"wrote {directory / 'summary.json'} and "
                         f"{directory / 'trajectories.csv'}\n")
    else:
        _print(summary)
    return PASS


def cmd_verify_azuma(args) -> int:
    report = concentration.verify_concentration(
        args.strategy, n=args.players, trials=args.trials,
        delta=args.delta, seed=args.seed, sampler=args.input)
    doc = report.to_json()
    if args.out:
        stats = hatgame.repeat_runs(args.strategy, args.input, n=args.players,
                                    trials=args.trials, seed=args.seed)
        doc["abs_s_values"] = [abs(st.s_sum) for st in stats]
        directory = _prepare_out(args.out, args.force, ("azuma.json",))
        (directory / "azuma.json").write_text(
            modelio.dumps(doc) + "\n", encoding="utf-8")
        doc.pop("abs_s_values")
    _print(doc)
    return PASS if report.passed else FAIL


def cmd_oracle(args) -> int:
    strategy = hatgame.parse_strategy(args.strategy)
    expected = concentration.exact_expected_wins(strategy, args.players)
    per_player = []
    for j in range(args.players):
        ws = concentration.win_set(strategy, j, args.players)
        per_player.append({"j": j, "wins": ws.count,
                           "total": 1 << args.players,
                           "measure_num": ws.measure.numerator,
                           "measure_den": ws.measure.denominator})
    _print({
        "strategy": strategy.label(), "players": args.players,
        "expected_wins_num": expected.numerator,
        "expected_wins_den": expected.denominator,
        "expected_ratio": expected.numerator / expected.denominator / args.players,
        "win_sets": per_player,
    })
    return PASS


def cmd_report(args) -> int:
    from . import viz
    written = viz.render_directory(Path(args.dir))
    for path in written:
        sys.stdout.write(f"{path}\n")
    return PASS


def cmd_referee(args) -> int:
    config = harness.RefereeConfig(
        n=args.players, horizon=args.horizon, sampler=args.input,
        seed=args.seed, trial=args.trial, block_size=args.block_size,
        port=args.port, timeout=args.timeout,
        checkpoints=tuple(_parse_checkpoints(args.checkpoints, args.players)
                          if args.checkpoints is not None else ()))
    referee = harness.Referee(config)
    sys.stdout.write(json.dumps({"type": "listening",
                                 "port": referee.port}) + "\n")
    sys.stdout.flush()
    try:
        stats = referee.run()
    except HarnessAbort as exc:
        _print({"type": "aborted", "error": str(exc),
                "errors": exc.errors})
        return FAIL
    _print({"type": "summary", **stats.to_json()})
    return PASS


def cmd_worker(args) -> int:
    host, _, port = args.connect.rpartition(":")
    try:
        status = harness.worker_run(args.strategy, host or "127.0.0.1",
                                    int(port), seed=args.seed,
                                    timeout=args.timeout)
    except (ProtocolError, OSError) as exc:
        sys.stderr.write(f"worker error: {exc}\n")
        return FAIL
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bellhat",
        description="No-signalling checks and hat-game simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-ns", help="no-signalling check of a model file")
    p.add_argument("--model", required=True,
                   help="model JSON path or bundled fixture name")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--fast", action="store_true",
                   help="only compare single-coordinate input flips")
    p.set_defaults(func=cmd_check_ns)

    p = sub.add_parser("check-local",
                       help="hidden-variable membership with certificate")
    p.add_argument("--model", required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_check_local)

    p = sub.add_parser("simulate", help="run the hat game and emit stats")
    p.add_argument("--strategy", required=True,
                   help="g | gj:J | d | e | random | majority | const:B")
    p.add_argument("--input", default="uniform",
                   help="uniform[:p] | evzero:M[:p]")
    p.add_argument("--players", type=int, required=True)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoints", default=None,
                   help="comma-separated k values (default: powers of two)")
    p.add_argument("--out", default=None, help="directory for CSV/JSON files")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-azuma",
                       help="empirical check of the deviation bound")
    p.add_argument("--strategy", required=True)
    p.add_argument("--input", default="uniform")
    p.add_argument("--players", type=int, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_verify_azuma)

    p = sub.add_parser("oracle",
                       help="exact expected wins by enumeration")
    p.add_argument("--strategy", required=True)
    p.add_argument("--players", type=int, required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="render figures from emitted outputs")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("referee", help="serve one harness run")
    p.add_argument("--players", type=int, required=True)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--input", default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--port", type=int, default=0,
                   help="0 picks a free port (printed on stdout)")
    p.add_argument("--block-size", type=int, default=None)
    p.add_argument("--timeout", type=float, default=harness.DEFAULT_TIMEOUT)
    p.add_argument("--checkpoints", default=None)
    p.set_defaults(func=cmd_referee)

    p = sub.add_parser("worker", help="serve one player block")
    p.add_argument("--connect", required=True, help="host:port of the referee")
    p.add_argument("--strategy", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--timeout", type=float, default=harness.DEFAULT_TIMEOUT)
    p.set_defaults(func=cmd_worker)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ContractError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE
    except HarnessAbort as exc:
        sys.stderr.write(f"error: {exc}\n")
        return FAIL
    except BellhatError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
