import sys
from pathlib import Path

import pytest

from acc_codesign import _kernels
from acc_codesign.model import TaskSet, TaskSpec, extract_task_set, instantiate
from acc_codesign.parser import parse_file

MODELS = Path(__file__).resolve().parents[1] / "src" / "acc_codesign" / "models"
CORPUS = Path(__file__).parent / "corpus"


def load_task_set(name):
    return extract_task_set(instantiate(parse_file(MODELS / name), "ACC_RD.impl"))


@pytest.fixture(scope="session")
def dual_ts():
    return load_task_set("acc_dual.adl")


@pytest.fixture(scope="session")
def single_ts():
    return load_task_set("acc_single.adl")


def make_ts(*specs, processors=("P",), protocol="rate_monotonic"):
    """specs: (name, C, T[, processor[, shared_data[, deadline]]]) with times in us."""
    tasks = []
    for s in specs:
        name, c, t = s[:3]
        proc = s[3] if len(s) > 3 else processors[0]
        shared = tuple(s[4]) if len(s) > 4 else ()
        deadline = s[5] if len(s) > 5 else None
        tasks.append(TaskSpec(name, t, c, deadline=deadline, processor=proc, shared_data=shared))
    return TaskSet(tasks, processors, protocol)


BACKENDS = list(_kernels.backends().values())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
