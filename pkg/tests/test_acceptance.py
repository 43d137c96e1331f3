"""End-to-end verification: one test per shipped guarantee.

Each check lives in :mod:`loggap.acceptance` (shared with the CLI
``selftest`` subcommand); here every criterion becomes one pass/fail
test with its pinned tolerances.
"""

import pytest

from loggap import acceptance as ac


@pytest.mark.parametrize("criterion", ac.CRITERIA,
                         ids=[f"criterion_{i + 1:02d}"
                              for i in range(len(ac.CRITERIA))])
def test_criterion(criterion):
    result = criterion()
    assert result.passed, (result.description, result.details)
