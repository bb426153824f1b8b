#!/usr/bin/env python3
"""Validate the CSV files emitted by the bench and sim tools.

Detects the schema from the header row, checks every data row for the
right column count, and type-checks the numeric columns. Exits nonzero
on the first problem.

Usage: check_csv.py FILE [FILE...]
"""

import csv
import sys

SCHEMAS = {
    "bench": (
        "mode,n,latency_ms,fib_n,serial_base,workers,reps,seed,mean_s,stddev_s,"
        "speedup,vs_ideal,steal_attempts,successful_steals,suspensions,resumptions,"
        "inline_completions,io_wakeups,io_registrations,peak_pending_futures,result,flagged"
    ),
    "sim": (
        "dag_id,workers,policy,seed,makespan,steal_attempts,successful_steals,"
        "deviations,suspensions,peak_pending_futures"
    ),
    "sim_sweep": (
        "dag_id,policy,workers,seeds,work,span,mean_makespan,mean_steal_attempts,"
        "mean_successful_steals,mean_deviations,mean_suspensions,mean_peak_pending,"
        "attempts_ratio,deviations_ratio"
    ),
    "breakeven": "breakeven_ms,bracket_lo_ms,bracket_hi_ms",
    "potential": "step,potential,log3",
}

TEXT_COLUMNS = {"mode", "flagged", "dag_id", "policy"}
OPTIONAL_COLUMNS = {"speedup", "vs_ideal", "log3"}


def check(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        return f"{path}: empty file"
    header = rows[0]
    schema = None
    for name, cols in SCHEMAS.items():
        if header == cols.split(","):
            schema = name
            break
    if schema is None:
        return f"{path}: unrecognized header {header}"
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            return f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}"
        for col, value in zip(header, row):
            if col in TEXT_COLUMNS:
                continue
            if value == "" and col in OPTIONAL_COLUMNS:
                continue
            try:
                float(value)
            except ValueError:
                return f"{path}:{lineno}: column {col} is not numeric: {value!r}"
    print(f"{path}: ok ({schema}, {len(rows) - 1} rows)")
    return None


def main(argv):
    if len(argv) < 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    for path in argv[1:]:
        problem = check(path)
        if problem:
            print(problem, file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
