"""The twelve acceptance criteria, each run at its registered defaults.

Every criterion prints one PASS/FAIL line (visible without ``-s``).  Run just
this file with ``pytest tests/test_acceptance.py -v``; the full set takes a few
minutes.
"""
import pytest

from flatlpp.experiments import ExperimentConfig, list_experiments, run_experiment

CRITERIA = {e.criterion: e.name for e in list_experiments() if e.criterion is not None}


def test_all_twelve_registered():
    assert sorted(CRITERIA) == list(range(1, 13))


@pytest.mark.slow
@pytest.mark.parametrize("criterion", sorted(CRITERIA), ids=lambda c: f"criterion{c:02d}_{CRITERIA[c]}")
def test_criterion(criterion, capsys):
    report = run_experiment(ExperimentConfig(CRITERIA[criterion]))
    with capsys.disabled():
        print(f"\n{report.summary_line()}  ({report.wall_clock:.1f}s)")
    failed = [f"{c.name}={c.value:.4g} (need {c.op} {c.tol:g})" for c in report.checks if not c.passed]
    assert report.passed, "; ".join(failed)
