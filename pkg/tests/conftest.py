"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from evtl.spaces import DataSpace, Interval, Penalty, SampleSet, identity_penalty
from evtl.simulation import RandomnessPlan
from evtl.chains import FiniteChain


ACCEPTANCE_LINES: list[str] = []


def record_criterion(line: str) -> None:
    """Collect an acceptance verdict for the end-of-run summary block."""
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def unit_space() -> DataSpace:
    return DataSpace({"x": Interval(0.0, 1.0)})


@pytest.fixture
def unit_penalty(unit_space) -> Penalty:
    return identity_penalty(unit_space, "x")


@pytest.fixture
def plan() -> RandomnessPlan:
    return RandomnessPlan(2024)


def unit_samples(space: DataSpace, values) -> SampleSet:
    return SampleSet(space, np.asarray(values, dtype=float)[:, None])


def two_state_chain(p_up: float, p_down: float, start: int = 0) -> FiniteChain:
    """Chain on {0, 1} with the given switching probabilities."""
    init = [1.0, 0.0] if start == 0 else [0.0, 1.0]
    return FiniteChain(
        "x",
        [0.0, 1.0],
        np.array([[1 - p_up, p_up], [p_down, 1 - p_down]]),
        np.array(init),
        [0.0, 1.0],
    )


def random_chain(rng: np.random.Generator, n_states: int, values=None) -> FiniteChain:
    """Chain with random transitions, initial weights and penalty table."""
    if values is None:
        values = np.sort(rng.random(n_states))
        while len(np.unique(values)) != n_states:
            values = np.sort(rng.random(n_states))
    P = rng.random((n_states, n_states)) + 1e-3
    P /= P.sum(axis=1, keepdims=True)
    init = rng.random(n_states) + 1e-3
    init /= init.sum()
    rho = rng.random(n_states)
    return FiniteChain("x", values, P, init, rho)
