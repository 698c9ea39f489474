import xml.etree.ElementTree as ET

from ppde.harness import (CheckReport, check_partial_comparison, check_snell, junit_xml, run_suite,
                          suite_failed, summary)


def test_default_suite_passes():
    reports = run_suite(threads=2)
    assert [r.name for r in reports] == sorted(r.name for r in reports)
    assert not suite_failed(reports), summary(reports)
    assert summary(reports).endswith(f"{len(reports)}/{len(reports)} checks passed")


def test_exceptions_become_errors_and_junit_parses():
    def boom():
        raise RuntimeError("broken")

    checks = {"b_ok": lambda: CheckReport("x", "pass", dict(err=0.0), dict(err=1e-9)),
              "a_boom": boom,
              "c_fail": lambda: CheckReport("y", "fail", dict(err=1.0), dict(err=0.1))}
    reports = run_suite(checks)
    assert [r.name for r in reports] == ["a_boom", "b_ok", "c_fail"]
    assert reports[0].status == "error" and "broken" in reports[0].message
    assert suite_failed(reports)
    root = ET.fromstring(junit_xml(reports))
    assert root.get("tests") == "3" and root.get("errors") == "1" and root.get("failures") == "1"
    assert root.find("testcase[@name='c_fail']/failure") is not None
    assert "ERROR a_boom" in summary(reports)


def test_partial_comparison_and_snell_checks():
    pts = [(t, x) for t in (0.0, 0.5) for x in (-1.0, 0.0, 1.0)]
    ok = check_partial_comparison(lambda t, x: x - 1, lambda t, x: x + 1, pts)
    bad = check_partial_comparison(lambda t, x: x + 1, lambda t, x: x, pts)
    assert ok.passed and not bad.passed
    assert check_snell(n_rewards=3, n_steps=5).passed
