"""Acceptance suite: one printed pass/fail line per criterion.

Tolerances, sizes and runtime budgets are pinned in
``coulombgas.verification.acceptance``; this module only runs each criterion
under the fixed suite seed and reports its line.
"""

import pytest

from coulombgas.verification import acceptance

SEED = 0


@pytest.mark.parametrize("number", [fn.number for fn in acceptance.CRITERIA])
def test_acceptance_criterion(number, capsys):
    (result,) = acceptance.run_all(only=[number], seed=SEED)
    with capsys.disabled():
        print("\n" + result.line())
    failed = [c.text() for c in result.checks if not (c.passed or c.informational)]
    assert result.passed, "; ".join(failed)
