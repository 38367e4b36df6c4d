"""Shared fixtures and independent dense oracles."""

from functools import lru_cache, reduce

import numpy as np
import pytest

from pqesim import fci_solve, jordan_wigner_hamiltonian, read_fcidump

I2 = np.eye(2)
Z2 = np.diag([1.0, -1.0])
LOWER = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1|: empties an occupied orbital


def kron_chain(factors):
    """Kronecker product with qubit 0 as the rightmost (least significant) factor."""
    return reduce(np.kron, reversed(factors), np.eye(1))


@lru_cache(maxsize=None)
def dense_annihilator(p: int, n: int) -> np.ndarray:
    return kron_chain([Z2] * p + [LOWER] + [I2] * (n - p - 1))


def dense_tau(holes, particles, n):
    """Dense ``tau = a+_a a+_b ... a_j a_i``."""
    tau = np.eye(1 << n)
    for a in particles:
        tau = tau @ dense_annihilator(a, n).T
    for i in reversed(holes):
        tau = tau @ dense_annihilator(i, n)
    return tau


def dense_excitation(holes, particles, n):
    """Dense ``kappa = tau - tau^dagger``."""
    tau = dense_tau(holes, particles, n)
    return tau - tau.T


@lru_cache(maxsize=None)
def problem(name):
    return read_fcidump(name)


@lru_cache(maxsize=None)
def hamiltonian(name):
    return jordan_wigner_hamiltonian(problem(name))


@lru_cache(maxsize=None)
def fci_energy(name):
    return fci_solve(problem(name)).ground_energy


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def report(number: int, ok: bool, detail: str):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
