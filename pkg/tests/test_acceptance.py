"""Acceptance criteria at their stated tolerances, one test each.

Every test prints a single PASS/FAIL line (bypassing output capture) before
asserting, so ``pytest -v`` shows the verdict table even when all pass.
"""

import json

import pytest

from sk_adapt.acceptance import CRITERIA, run_criterion


def _line(res) -> str:
    detail = json.dumps(res.detail, default=str, sort_keys=True)
    if len(detail) > 400:
        detail = detail[:397] + "..."
    status = "PASS" if res.passed else "FAIL"
    return f"{status} criterion {res.cid:>2} ({res.name}) [{res.seconds:.1f}s] {detail}"


@pytest.mark.parametrize("cid", sorted(CRITERIA))
def test_criterion(cid, capsys):
    res = run_criterion(cid, quick=False)
    with capsys.disabled():
        print("\n" + _line(res))
    assert res.passed, _line(res)
