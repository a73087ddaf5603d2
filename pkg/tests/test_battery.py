import pytest

from experiments import battery
from lcpg.errors import InvariantViolationError


def test_quick_checks_pass():
    names = {"scad-example-values", "level-schedules", "svrg-epoch-start", "smoothing-sandwich"}
    results = battery.run_check_battery(names)
    assert {r.name for r in results} == names
    assert all(r.passed for r in results), [r.detail for r in results if not r.passed]


def test_failures_are_reported(monkeypatch):
    def broken():
        raise InvariantViolationError("boom")

    monkeypatch.setattr(battery, "CHECKS", (("broken", broken), ("fine", lambda: "ok")))
    results = battery.run_check_battery()
    assert [(r.name, r.passed) for r in results] == [("broken", False), ("fine", True)]
    assert results[0].detail == "InvariantViolationError: boom"


def test_require_raises_without_assert_statements():
    with pytest.raises(InvariantViolationError, match="drifted"):
        battery._require(False, "drifted")
    battery._require(True, "unused")


def test_failing_check_is_caught(monkeypatch):
    monkeypatch.setattr(battery, "subdiff_interval", lambda term, x, j: (0.0, 1.0))
    monkeypatch.setattr(battery, "CHECKS", (("scad-example-values", battery.check_scad_example),))
    (result,) = battery.run_check_battery()
    assert not result.passed
    assert result.detail.startswith("InvariantViolationError: chi subdifferential")


@pytest.mark.slow
def test_full_battery():
    results = battery.run_check_battery()
    assert len(results) == len(battery.CHECKS)
    assert all(r.passed for r in results), [r.detail for r in results if not r.passed]
