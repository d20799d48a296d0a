import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fairfeedback.data import DataTuple, DonorProfile, RecipientRecord, SynthSpec, synthesize_dataset  # noqa: E402


def recipient(age=40, race="White", gender="Male", ttno=5.0, mortality=0.2, decision=0,
              epts=50, distance=10.0):
    return RecipientRecord(age=age, race=race, gender=gender, epts=epts, distance=distance,
                           ttno=ttno, mortality=mortality, decision=decision)


def donor():
    return DonorProfile(age=30, race="Black", gender="Female", kdpi=45)


def symmetric_tuple():
    """Age groups (<=50 vs >50) with element-wise identical predictions and decisions."""
    preds = [(3.0, 0.10, 1), (7.5, 0.30, 0), (12.0, 0.22, 0), (4.4, 0.41, 0), (9.1, 0.15, 0)]
    recs = []
    for t, m, z in preds:
        recs.append(recipient(age=35, ttno=t, mortality=m, decision=z))
        recs.append(recipient(age=62, ttno=t, mortality=m, decision=z))
    return DataTuple(donor(), tuple(recs))


@pytest.fixture(scope="session")
def pool():
    return synthesize_dataset(SynthSpec(num_tuples=120, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one summary line per acceptance criterion, shown after the run
_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if name.startswith("test_criterion_") and (report.when == "call" or report.outcome != "passed"):
        n = int(name.split("_")[2])
        _criteria.setdefault(n, (report.outcome.upper(), report.duration, name))
        if report.when == "call":
            _criteria[n] = ("PASS" if report.passed else "FAIL", report.duration, name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        outcome, secs, name = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {outcome:4s} {secs:7.1f}s  {name}")
