"""Runs every acceptance criterion at its stated tolerance and prints one PASS/FAIL line each."""

import pytest

from mvlab.acceptance import CHECKS


@pytest.mark.parametrize("name", list(CHECKS))
def test_criterion(name, capsys):
    res = CHECKS[name]()
    with capsys.disabled():
        print("\n" + res.line(), flush=True)
    assert res.passed, res.details
