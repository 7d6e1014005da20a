"""Acceptance battery: every numbered criterion must pass at its tolerance.

Each criterion appears as one parametrized case so the verbose run prints one
pass/fail line per criterion. The detailed targets and tolerances (and the
golden comparisons) live in ``shillbench.acceptance``; failures surface the
runner's own diagnostic string.
"""

import pytest

from shillbench import scenarios
from shillbench.acceptance import criterion_names, run_criterion
from shillbench.errors import ConfigurationError

_CASES = [
    pytest.param(name, id=f"c{num:02d}-{name}")
    for num, name in enumerate(criterion_names(), start=1)
]


@pytest.mark.parametrize("name", _CASES)
def test_criterion(name):
    result = run_criterion(name)
    assert result.passed, result.detail


def test_registry_matches_bundled_scenarios():
    assert criterion_names() == scenarios.names()
    assert len(criterion_names()) == 15


def test_unknown_criterion_rejected():
    with pytest.raises(ConfigurationError):
        run_criterion("no-such-criterion")
