"""Command-line front end.

Exit codes: 0 success, 1 invalid scenario (including a stuck tree walk),
2 I/O failure.  Errors go to stderr as one line:
``rfidauth: error: <Kind>: <message>``.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .adversary import clone_attack, replay_attack, tracking_probe
from .engine import RunResult, run_scenario
from .reader import Verdict, WalkStuck
from .scenario import Scenario, ScenarioInvalid, parse_scenario

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfidauth", description="RFID authentication protocol simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("--scenario", required=True, type=Path, help="scenario JSON file")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--out", type=Path, help="write metrics JSON here")
    run.add_argument("--trace", type=Path, help="write the event trace here")
    run.add_argument("--attack", choices=("replay", "clone", "tracking"), help="run an attack instead")
    run.add_argument("--trials", type=int, default=1000, help="attack trials (default 1000)")
    run.add_argument("--compare", action="store_true",
                     help="run sequential and interleaved authentication and compare")
    return parser


def _write(path: Path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, "IOError", f"{path}: {exc.strerror or exc}") from None


def load_scenario(path: Path, seed: int | None) -> Scenario:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, "IOError", f"{path}: {exc.strerror or exc}") from None
    try:
        scenario = parse_scenario(text)
        if seed is not None:
            scenario = dataclasses.replace(scenario, seed=seed)
    except ScenarioInvalid as exc:
        raise CliError(EXIT_INVALID, type(exc).__name__, str(exc)) from None
    return scenario


def _run(scenario: Scenario) -> RunResult:
    try:
        return run_scenario(scenario)
    except WalkStuck as exc:
        raise CliError(EXIT_INVALID, "WalkStuck", str(exc)) from None


def _verified(res: RunResult) -> str:
    ok = sum(1 for v in res.verdicts.values() if v is Verdict.VERIFIED)
    return f"{ok}/{len(res.verdicts)}"


def compare_table(seq: RunResult, inter: RunResult) -> str:
    rows = [("mode", "auth_us", "total_us", "verified")]
    rows.append(("sequential", str(seq.auth_time_us), str(seq.metrics.total_time_us), _verified(seq)))
    rows.append(("interleaved", str(inter.auth_time_us), str(inter.metrics.total_time_us), _verified(inter)))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths)))
             for r in rows]
    ratio = inter.auth_time_us / seq.auth_time_us if seq.auth_time_us else 1.0
    lines.append(f"ratio interleaved/sequential (auth phase): {ratio:.3f}")
    return "\n".join(lines) + "\n"


def _attack(scenario: Scenario, name: str, trials: int):
    keystore = scenario.reader_keystore()
    if name == "tracking":
        alias = bool(scenario.tags) and scenario.tags[0].alias_mode
        return tracking_probe(trials, alias, scenario.seed, timing=scenario.timing)
    if not scenario.tags:
        raise CliError(EXIT_INVALID, "ScenarioInvalid", f"--attack {name} needs at least one tag")
    if name == "clone":
        return clone_attack(scenario.tags[0].id, keystore, trials, scenario.seed, timing=scenario.timing)
    mode = scenario.mode if scenario.mode in ("seq-auth", "interleaved-auth", "mutual") else "seq-auth"
    recorded = _run(dataclasses.replace(scenario, mode=mode))
    try:
        return replay_attack(recorded.trace, keystore, trials, scenario.seed, timing=scenario.timing)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, "ScenarioInvalid", str(exc)) from None


def cmd_run(args: argparse.Namespace, stdout=None) -> int:
    stdout = stdout or sys.stdout
    scenario = load_scenario(args.scenario, args.seed)

    if args.attack:
        result = _attack(scenario, args.attack, args.trials)
        stdout.write(result.to_json())
        if args.out:
            _write(args.out, result.to_json())
        return EXIT_OK

    result = _run(scenario)
    if args.out:
        _write(args.out, result.metrics.to_json())
    if args.trace:
        _write(args.trace, result.trace.serialize())

    if args.compare:
        seq = _run(dataclasses.replace(scenario, mode="seq-auth"))
        inter = _run(dataclasses.replace(scenario, mode="interleaved-auth"))
        stdout.write(compare_table(seq, inter))
    else:
        stdout.write(
            f"mode={scenario.mode} seed={scenario.seed} found={len(result.found)} "
            f"verified={_verified(result)} inventory_us={result.inventory_time_us} "
            f"auth_us={result.auth_time_us} total_us={result.metrics.total_time_us}\n"
        )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return cmd_run(args)
    except CliError as exc:
        print(f"rfidauth: error: {exc.kind}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
