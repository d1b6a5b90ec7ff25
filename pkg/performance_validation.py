#!/usr/bin/env python3
"""
Замер времени и памяти команд ksurface_cli в отдельных процессах.

RSS снимается psutil по ходу выполнения; при превышении бюджета времени
скрипт завершается с кодом 2.
"""
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import psutil

ROOT = Path(__file__).resolve().parent

# (команда, дополнительные флаги, бюджет в секундах)
RUNS = [
    ("oracle", ["--refinement", "3"], 60.0),
    ("solve-lens", ["--refinement", "3", "--k", "0.25"], 300.0),
    ("solve-plateau", ["--refinement", "3", "--k", "0.25"], 600.0),
]


def measure(command: str, flags: list, out_dir: Path) -> tuple:
    args = [sys.executable, str(ROOT / "ksurface_cli.py"), command, "--out", str(out_dir), *flags]
    start = time.perf_counter()
    proc = subprocess.Popen(args, cwd=ROOT, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    p = psutil.Process(proc.pid)
    peak = 0
    while proc.poll() is None:
        try:
            peak = max(peak, p.memory_info().rss)
        except psutil.NoSuchProcess:
            break
        time.sleep(0.2)
    return proc.returncode, time.perf_counter() - start, peak


def main() -> int:
    over_budget = False
    with tempfile.TemporaryDirectory() as tmp:
        for command, flags, budget in RUNS:
            code, elapsed, peak = measure(command, flags, Path(tmp) / command)
            status = "OK" if code == 0 and elapsed <= budget else "FAIL"
            over_budget |= elapsed > budget
            print(
                f"{command:<14} exit={code} time={elapsed:7.1f}s (бюджет {budget:.0f}s) "
                f"peak rss={peak / 2**20:7.1f} MiB  {status}"
            )
    if over_budget:
        print("Бюджет времени превышен")
        return 2
    print("Performance smoke test: OK")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
