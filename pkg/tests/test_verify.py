"""Every self-check in the property suite must pass individually."""

import pytest

from factored_pg.verify import CHECKS, run_all


@pytest.mark.parametrize("check", CHECKS, ids=lambda fn: fn.__name__)
def test_check_passes(check):
    result = check()
    assert result.passed, result.line()


def test_run_all_reports_every_check():
    results = run_all()
    assert len(results) == len(CHECKS)
    names = [r.name for r in results]
    assert len(set(names)) == len(names)
    for res in results:
        line = res.line()
        assert line.startswith("PASS") or line.startswith("FAIL")
