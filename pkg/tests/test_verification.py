"""
Tests for the combined symbolic suite
"""

import pytest

from pss_lab.errors import ParameterError
from pss_lab.services.verification import VerificationSuite


@pytest.fixture(scope="module")
def report():
    return VerificationSuite(threads=2).run(3)


def test_everything_passes(report):
    assert report.passed, report.failed()
    assert report.suite == "verify"


def test_mutations_are_detected(report):
    names = {check.name for check in report.checks}
    assert {"mutation-detected[negative]", "mutation-detected[positive]"} <= names


def test_exactness_ranges(report):
    anchors = [check.anchor for check in report.checks]
    assert any(anchor.startswith("exactness") for anchor in anchors)


def test_kmax_lower_bound():
    with pytest.raises(ParameterError):
        VerificationSuite().run(1)


def test_mutation_report_alone():
    mutation = VerificationSuite().mutation_report()
    assert mutation.passed
    assert len(mutation.checks) == 2
