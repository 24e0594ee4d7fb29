import numpy as np
import pytest

from ghznet.qstate import StateVector, qubits

CRITERIA: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_state(labels, rng, dims=None):
    dims = dims or [2] * len(labels)
    from ghznet.qstate import ModeDescriptor

    modes = [ModeDescriptor(lab, d, "qubit" if d == 2 else "oscillator") for lab, d in zip(labels, dims)]
    v = rng.normal(size=int(np.prod(dims))) + 1j * rng.normal(size=int(np.prod(dims)))
    return StateVector(tuple(modes), v / np.linalg.norm(v))


def ket(bits: str, labels=None) -> StateVector:
    labels = labels or [f"q{k}" for k in range(len(bits))]
    return StateVector.basis(qubits(*labels), [int(b) for b in bits])


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
