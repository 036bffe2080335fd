import numpy as np
import pytest

from contactnh.constrained import ConstrainedSystem, ConstraintSet, ForceBasis
from contactnh.fields import PhasePoint, ScalarField


def make_system(n, h_text, phi_texts, force_rows):
    return ConstrainedSystem(
        n=n,
        H=ScalarField.from_string(h_text, n),
        constraints=ConstraintSet.from_strings(n, phi_texts),
        forces=ForceBasis.from_strings(n, force_rows),
    )


@pytest.fixture
def particle():
    """Damped particle with one nonholonomic constraint (main test system)."""
    return make_system(
        2,
        "(p1^2 + p2^2)/2 + z",
        ["p2 - q1*p1"],
        [(["-q1", "1"], ["0", "0"], "0")],
    )


@pytest.fixture
def diag_metric_system():
    """Induced system of the diag(2,1)-metric variant with form dq2."""
    return make_system(
        2,
        "p1^2/4 + p2^2/2 + z",
        ["p2"],
        [(["0", "1"], ["0", "0"], "0")],
    )


@pytest.fixture
def vertical_force_system():
    """Non-mechanical system whose force annihilates the Reeb field."""
    return make_system(
        2,
        "(p1^2 + p2^2)/2 + 0.1*q1^2 + z",
        ["p1 + 0.2*q2^2 + q1"],
        [(["0.2*q2", "0"], ["0.5", "0.3"], "0")],
    )


@pytest.fixture
def unconstrained():
    return make_system(2, "(p1^2 + p2^2)/2 + z", [], [])


@pytest.fixture
def sample_point():
    return PhasePoint(2, [1.0, 0.0], [1.0, 1.0], 0.0)
