"""Quick performance benchmark: one small run of every suite."""
import sys
import tempfile
import time

from emlab.config import build_config
from emlab.suites import run_suite

RUNS = [
    ("riesz", {"jmax": 12}),
    ("weights", {"jmax": 6}),
    ("kp", {"jmax": 4}),
    ("solve", {"jmax": 1}),
    ("kernel-compare", {"jmax": 1}),
]

only = set(sys.argv[1:])
total = time.time()
with tempfile.TemporaryDirectory() as out:
    for suite, flags in RUNS:
        if only and suite not in only:
            continue
        cfg = build_config(suite, {}, {**flags, "out": out})
        t = time.time()
        report = run_suite(cfg)
        elapsed = time.time() - t
        print(f"{suite:<15} jmax={cfg.j_max:<3} {elapsed:7.2f}s  "
              f"{len(report.checks)} checks, {len(report.hard_failures)} failed")

print(f"Total time: {time.time() - total:.2f}s")
