import json

import pytest

from dynmatch.core import instance_from_json
from dynmatch.errors import UnknownSuite
from dynmatch.harness import suites
from dynmatch.harness.generators import NECESSITY_CLAUSES
from dynmatch.harness.suites import SUITES, necessity_check, verify_suite


@pytest.mark.parametrize("name", sorted(SUITES))
def test_each_suite_passes_a_few_trials(name):
    report = verify_suite(name, 3, seed=5)
    assert report.passed, report.failures


def test_unknown_suite():
    with pytest.raises(UnknownSuite, match="choose from"):
        verify_suite("nope", 1)


def test_iou_ratio_never_below_half():
    report = verify_suite("iou_bound", 50, seed=1)
    assert report.passed
    assert min(report.stat("ratio")) >= 0.5 - 1e-9
    assert report.to_dict()["min_ratio"] == min(report.stat("ratio"))


@pytest.mark.parametrize("clause", NECESSITY_CLAUSES)
def test_counterexamples_break_priority(clause):
    ok, msg, _ = necessity_check(clause)
    assert ok, msg


def test_results_do_not_depend_on_workers():
    a = verify_suite("transport_oracle", 30, seed=3)
    b = verify_suite("transport_oracle", 30, seed=3, workers=4)
    assert [r.ok for r in a.results] == [r.ok for r in b.results]
    assert a.summary_line() == b.summary_line() == "PASS transport_oracle: 30/30"


def test_failing_trial_carries_replayable_instance(monkeypatch):
    def broken(rng):
        from dynmatch.harness.generators import horizontal_2x2_case

        return False, "forced", horizontal_2x2_case(rng)

    monkeypatch.setitem(suites.SUITES, "broken", broken)
    report = verify_suite("broken", 2)
    assert not report.passed and len(report.failures) == 2
    inst = instance_from_json(report.failures[0].instance)
    assert inst.m == inst.n == 2
    assert json.loads(json.dumps(report.to_dict()))["failures"][0]["message"] == "forced"
