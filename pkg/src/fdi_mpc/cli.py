"""Command-line front end.

::

    fdi-mpc run SCENARIO.yaml [--output DIR] [--set key.path=value ...] [--quiet]
    fdi-mpc batch 'scenarios/*.yaml' [--output DIR] [--jobs J]
    fdi-mpc validate SCENARIO.yaml [--set ...]

``run`` exits 0 when the scenario completes without alarm, 2 when an attack
was declared and 1 on any error. The default output directory is taken from
``$FDI_MPC_OUTPUT`` (falling back to ``./runs``).
"""

from __future__ import annotations

import argparse
import csv
import glob
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .reference import ReferenceInitError
from .scenario import ScenarioError, load_scenario, shipped_scenarios
from .sim import RunLog, run

logger = logging.getLogger(__name__)

OUTPUT_ENV = "FDI_MPC_OUTPUT"
LOG_HEADER = [
    "k", "t", "x1", "x2", "y1", "y2", "ytilde1", "ytilde2", "u", "ua", "ya1", "ya2",
    "residual", "cusum", "alarm", "status", "cost", "violation",
]
BATCH_HEADER = ["scenario", "alarmed", "alarm_step", "delay", "max_h1", "max_h2", "false_positive", "error"]

EXIT_OK, EXIT_ERROR, EXIT_ALARM = 0, 1, 2


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def log_rows(log: RunLog):
    for r in log.records:
        yield [
            str(r.k), _fmt(r.t),
            *(_fmt(v) for v in r.x_true), *(_fmt(v) for v in r.y_measured),
            *(_fmt(v) for v in r.ytilde), _fmt(r.u[0]), _fmt(r.u_attack[0]),
            *(_fmt(v) for v in r.y_attack),
            _fmt(r.residual), _fmt(r.cusum), "1" if r.alarm else "0",
            r.status, _fmt(r.cost), _fmt(r.violation),
        ]


def write_log_csv(log: RunLog, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_HEADER)
        w.writerows(log_rows(log))


def read_log_csv(path) -> list[dict]:
    """Parse a ``log.csv`` back into dicts of floats (``status`` stays a string)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for key, val in row.items():
                if key == "status":
                    rec[key] = val
                elif key in ("k", "alarm"):
                    rec[key] = int(val)
                else:
                    rec[key] = float(val)
            out.append(rec)
    return out


def summary_text(log: RunLog) -> str:
    delay = log.detection_delay()
    alarm = log.alarm_step
    lines = [
        f"scenario: {log.scenario}",
        f"steps: {len(log)}",
        f"halted_reason: {log.halted_reason}",
        f"attack_start: {log.attack_start if log.attack_start is not None else 'none'}",
        f"alarm_step: {alarm if alarm is not None else 'none'}",
        f"alarm_time_s: {alarm * log.sample_time:.6g}" if alarm is not None else "alarm_time_s: none",
        f"detection_delay: {delay if delay is not None else 'none'}",
        f"false_positive: {str(log.false_positive).lower()}",
        "max_state: " + ", ".join(_fmt(v) for v in log.max_state),
        "final_state: " + ", ".join(_fmt(v) for v in log.final_state),
    ]
    return "\n".join(lines) + "\n"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def _resolve(scenario_path) -> Path:
    p = Path(scenario_path)
    if not p.exists():
        shipped = shipped_scenarios()
        if str(scenario_path) in shipped:
            return shipped[str(scenario_path)]
    return p


def run_command(scenario_path, output_dir=None, overrides=(), quiet: bool = False) -> int:
    """Run one scenario and write ``log.csv`` and ``summary.txt`` into ``output_dir``."""
    path = _resolve(scenario_path)
    try:
        scenario = load_scenario(path, overrides)
        log = run(scenario)
    except (ScenarioError, ReferenceInitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = Path(output_dir) if output_dir is not None else default_output_dir() / path.stem
    out.mkdir(parents=True, exist_ok=True)
    write_log_csv(log, out / "log.csv")
    summary = summary_text(log)
    (out / "summary.txt").write_text(summary)
    if not quiet:
        print(summary, end="")
    return EXIT_ALARM if log.alarm_step is not None else EXIT_OK


def _batch_one(args):
    path, out_dir = args
    row = {k: "" for k in BATCH_HEADER}
    row["scenario"] = Path(path).stem
    try:
        log = run(load_scenario(path))
    except (ScenarioError, ReferenceInitError, ValueError) as exc:
        row["error"] = str(exc).replace("\n", " ")
        return row
    out = Path(out_dir) / Path(path).stem
    out.mkdir(parents=True, exist_ok=True)
    write_log_csv(log, out / "log.csv")
    (out / "summary.txt").write_text(summary_text(log))
    delay = log.detection_delay()
    row.update(
        alarmed=str(log.alarm_step is not None).lower(),
        alarm_step="" if log.alarm_step is None else str(log.alarm_step),
        delay="" if delay is None else str(delay),
        max_h1=_fmt(log.max_state[0]),
        max_h2=_fmt(log.max_state[1]),
        false_positive=str(log.false_positive).lower(),
    )
    return row


def batch_command(scenario_glob, output_dir=None, jobs: int | None = None) -> int:
    """Run every scenario matching the glob; aggregate results in ``batch.csv``."""
    paths = sorted(glob.glob(str(scenario_glob)))
    if not paths:
        print(f"error: no scenario matches {scenario_glob!r}", file=sys.stderr)
        return EXIT_ERROR
    out = Path(output_dir) if output_dir is not None else default_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    work = [(p, out) for p in paths]
    jobs = jobs or 1
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_batch_one, work))
    else:
        rows = [_batch_one(w) for w in work]
    with open(out / "batch.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, BATCH_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    failed = [r for r in rows if r["error"]]
    for r in failed:
        print(f"error: {r['scenario']}: {r['error']}", file=sys.stderr)
    return EXIT_ERROR if failed else EXIT_OK


def validate_command(scenario_path, overrides=()) -> int:
    try:
        load_scenario(_resolve(scenario_path), overrides)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print("ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fdi-mpc", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("scenario", help="scenario file, or the name of a shipped scenario")
    p.add_argument("-o", "--output", help=f"output directory (default: ${OUTPUT_ENV}/<scenario>)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("-q", "--quiet", action="store_true")

    p = sub.add_parser("batch", help="run all scenarios matching a glob")
    p.add_argument("pattern")
    p.add_argument("-o", "--output", help=f"output directory (default: ${OUTPUT_ENV})")
    p.add_argument("-j", "--jobs", type=int, default=1)
    p.add_argument("-q", "--quiet", action="store_true")

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return run_command(args.scenario, args.output, args.overrides, args.quiet)
    if args.command == "batch":
        return batch_command(args.pattern, args.output, args.jobs)
    return validate_command(args.scenario, args.overrides)


if __name__ == "__main__":
    sys.exit(main())
