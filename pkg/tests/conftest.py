import sys
import warnings
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mlpqe import fixture_path  # noqa: E402
from mlpqe.pqe import Problem, run_conventional  # noqa: E402

# dUCCSD for the two-electron and water fixtures, dUCCSDTQ for H4
RANKS = {"h2": 2, "h4_0.75": 4, "h4_1.50": 4, "h2o": 2, "h2o_stretched": 2}

ACCEPTANCE_LINES: dict[str, list[str]] = {}


@lru_cache(maxsize=None)
def problem(name: str) -> Problem:
    return Problem.from_fcidump(fixture_path(name))


@lru_cache(maxsize=None)
def pool(name: str):
    return problem(name).build_pool(RANKS[name])


@lru_cache(maxsize=None)
def conventional(name: str):
    return run_conventional(problem(name), pool(name))


@lru_cache(maxsize=None)
def ml_trace(name: str, lrnt: float = 0.007):
    from mlpqe.surrogate import MLSettings, run_ml_pqe

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_ml_pqe(problem(name), pool(name), ml=MLSettings(lrnt=lrnt))


def report(criterion: str, passed: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.setdefault(criterion, []).append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (len(k), k)):
        for line in ACCEPTANCE_LINES[key]:
            terminalreporter.write_line(line)
