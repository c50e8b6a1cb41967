"""The 14 acceptance criteria at their stated tolerances.

Each criterion prints one [PASS]/[FAIL] line; the lines are repeated in
the terminal summary.  Run this file directly for the lines alone.
"""
import json

import pytest

from ultraflat import acceptance

from conftest import ACCEPTANCE_LINES


@pytest.mark.acceptance
@pytest.mark.parametrize("cid", sorted(acceptance.CRITERIA))
def test_criterion(cid):
    res = acceptance.run_criterion(cid)
    ACCEPTANCE_LINES[cid] = res.line()
    print(res.line())
    detail = json.dumps(res.to_dict()["measured"], default=str)[:2000]
    assert res.passed, f"{res.line()}\nmeasured: {detail}"


if __name__ == "__main__":
    bad = 0
    for r in acceptance.run_all():
        print(r.line())
        bad += not r.passed
    raise SystemExit(1 if bad else 0)
