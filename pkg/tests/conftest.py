import json
from pathlib import Path

import pytest

ORACLES = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())

# daily rows of the reported rate table: lambda_b, lambda_a, mu_b, mu_a
REFERENCE_ROWS = [
    (494.1500, 563.2474, 570.6227, 553.9348),
    (610.9476, 578.6165, 628.9185, 613.8630),
    (661.5511, 658.3967, 719.7569, 672.8735),
    (398.4293, 401.4344, 404.4485, 415.3457),
    (427.9106, 440.4546, 447.9598, 458.7763),
]
REFERENCE_AVE = (518.5977, 528.4299, 554.3413, 542.9587)


@pytest.fixture
def oracles():
    return ORACLES


def write_reference_events(path, t_d=23400.0, base_lot=100.0):
    """One row per (day, side, kind) whose size reproduces the daily rate exactly."""
    lines = ["day,t,side,kind,size"]
    for d, (lb, la, mb, ma) in enumerate(REFERENCE_ROWS, start=1):
        for side, kind, rate in (("B", "L", lb), ("A", "L", la), ("B", "M", mb), ("A", "M", ma)):
            lines.append(f"{d},0,{side},{kind},{rate * t_d * base_lot:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def reference_events(tmp_path):
    return write_reference_events(tmp_path / "reference_events.csv")


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance_line():
    def record(number, passed, text):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {text}"
        ACCEPTANCE_LINES[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
