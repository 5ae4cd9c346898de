"""Trajectory simulation of discrete-time Markov kernels.

A kernel owns a data space and knows how to draw one successor state from the
current one. Everything stochastic flows through a :class:`RandomnessPlan`,
which derives independent, reproducible generator streams from a single
master seed and a structured purpose key. Run j of an estimate always draws
from stream ``(0, j)``, so results are identical no matter how runs are
scheduled across workers.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from ._io import open_sink
from .spaces import DataSpace, DataState, SampleSet

__all__ = [
    "MarkovKernel",
    "RandomnessPlan",
    "Trajectory",
    "EvolutionEstimate",
    "simulate",
    "estimate",
    "run_moments",
    "empirical_measure",
    "save_trajectory",
    "save_estimate",
]


@runtime_checkable
class MarkovKernel(Protocol):
    """One-step stochastic transition function over a data space."""

    @property
    def space(self) -> DataSpace: ...

    def step(self, state: DataState, rng: np.random.Generator) -> DataState: ...


@dataclass(frozen=True)
class RandomnessPlan:
    """Functional derivation of independent RNG streams from one master seed.

    Streams are addressed by integer tuples: equal keys give bitwise-equal
    streams, distinct keys give statistically independent ones. Simulation
    owns the ``(0, run)`` keys; formula evaluation derives everything else
    under ``(1, ...)``. ``scoped`` prefixes a namespace, yielding a plan
    whose whole key tree is disjoint from the parent's (used to keep
    reference runs independent of the runs they validate).
    """

    master_seed: int
    namespace: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ValueError("master seed must be a non-negative integer")

    def scoped(self, *prefix: int) -> "RandomnessPlan":
        return RandomnessPlan(self.master_seed, self.namespace + prefix)

    def seed_sequence(self, *key: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=self.namespace + tuple(key))

    def substream(self, *key: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence(*key)))


class Trajectory:
    """States of one simulation run, indices 0..steps."""

    __slots__ = ("space", "values")

    def __init__(self, space: DataSpace, values: np.ndarray):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != space.dim:
            raise ValueError(f"expected (steps+1, {space.dim}) array, got {arr.shape}")
        self.space = space
        self.values = arr

    @property
    def steps(self) -> int:
        return self.values.shape[0] - 1

    def state(self, i: int) -> DataState:
        return DataState(self.space, tuple(float(x) for x in self.values[i]))

    @property
    def states(self) -> list[DataState]:
        return [self.state(i) for i in range(self.steps + 1)]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.space.index(name)]


class EvolutionEstimate:
    """Per-step samples of the state distribution, one row per run.

    Stored as a (steps+1, runs, dim) array; ``at(i)`` views step i as a
    :class:`SampleSet` without copying. Row order is the run index, which the
    monitor relies on when it truncates a sample set to its first N rows.
    """

    __slots__ = ("space", "values")

    def __init__(self, space: DataSpace, values: np.ndarray):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != space.dim:
            raise ValueError(f"expected (steps+1, runs, {space.dim}) array, got {arr.shape}")
        self.space = space
        self.values = arr

    @property
    def steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def runs(self) -> int:
        return self.values.shape[1]

    def at(self, i: int) -> SampleSet:
        if not 0 <= i <= self.steps:
            raise IndexError(f"step {i} outside 0..{self.steps}")
        return SampleSet(self.space, self.values[i])

    def column(self, name: str) -> np.ndarray:
        """(steps+1, runs) slice of one variable."""
        return self.values[:, :, self.space.index(name)]

    def trajectory(self, run: int) -> Trajectory:
        return Trajectory(self.space, self.values[:, run, :])


def simulate(
    kernel: MarkovKernel,
    initial: DataState,
    steps: int,
    rng: np.random.Generator,
) -> Trajectory:
    """Roll the kernel forward ``steps`` times from ``initial``."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    space = kernel.space
    if initial.space != space:
        raise ValueError("initial state space differs from kernel space")
    out = np.empty((steps + 1, space.dim))
    out[0] = initial.values
    state = initial
    for i in range(1, steps + 1):
        state = kernel.step(state, rng)
        out[i] = state.values
    return Trajectory(space, out)


def _run_block(
    kernel: MarkovKernel,
    initial_values: tuple[float, ...],
    steps: int,
    plan: RandomnessPlan,
    first_run: int,
    n_runs: int,
) -> np.ndarray:
    space = kernel.space
    initial = DataState(space, initial_values)
    block = np.empty((steps + 1, n_runs, space.dim))
    for j in range(n_runs):
        rng = plan.substream(0, first_run + j)
        block[:, j, :] = simulate(kernel, initial, steps, rng).values
    return block


def estimate(
    kernel: MarkovKernel,
    initial: DataState,
    steps: int,
    runs: int,
    plan: RandomnessPlan,
    workers: int = 1,
) -> EvolutionEstimate:
    """Simulate ``runs`` independent trajectories and collect them per step.

    Run j always uses stream ``(0, j)`` of the plan, so the result is
    bit-identical for any worker count.
    """
    if runs < 1:
        raise ValueError("need at least one run")
    space = kernel.space
    if workers <= 1 or runs == 1:
        values = _run_block(kernel, initial.values, steps, plan, 0, runs)
        return EvolutionEstimate(space, values)
    workers = min(workers, runs)
    bounds = np.linspace(0, runs, workers + 1).astype(int)
    values = np.empty((steps + 1, runs, space.dim))
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {
            pool.submit(_run_block, kernel, initial.values, steps, plan, int(a), int(b - a)): (a, b)
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        }
        for fut in concurrent.futures.as_completed(futures):
            a, b = futures[fut]
            values[:, a:b, :] = fut.result()
    return EvolutionEstimate(space, values)


def _moment_block(
    kernel: MarkovKernel,
    initial_values: tuple[float, ...],
    steps: int,
    plan: RandomnessPlan,
    first_run: int,
    n_runs: int,
) -> tuple[np.ndarray, np.ndarray]:
    space = kernel.space
    initial = DataState(space, initial_values)
    total = np.zeros((steps + 1, space.dim))
    total_sq = np.zeros((steps + 1, space.dim))
    for j in range(n_runs):
        rng = plan.substream(0, first_run + j)
        vals = simulate(kernel, initial, steps, rng).values
        total += vals
        total_sq += vals * vals
    return total, total_sq


# fixed accumulation block for run_moments; must not depend on the worker
# count, or the float fold order (and so the last bits) would change with it
_MOMENT_BLOCK = 1024


def run_moments(
    kernel: MarkovKernel,
    initial: DataState,
    steps: int,
    runs: int,
    plan: RandomnessPlan,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Streaming per-step mean and sample std over ``runs`` trajectories.

    Returns (mean, std), each (steps+1, dim). Uses running sums instead of
    materializing the estimate, so reference runs with very large N stay at
    constant memory. Uses the same ``(0, run)`` streams as :func:`estimate`,
    and accumulates over fixed-size blocks folded in block order, so the
    result is bit-identical for any worker count.
    """
    if runs < 2:
        raise ValueError("need at least two runs for a sample std")
    blocks = [(a, min(_MOMENT_BLOCK, runs - a)) for a in range(0, runs, _MOMENT_BLOCK)]
    total = np.zeros((steps + 1, kernel.space.dim))
    total_sq = np.zeros((steps + 1, kernel.space.dim))
    if workers <= 1 or len(blocks) == 1:
        for a, n in blocks:
            t, ts = _moment_block(kernel, initial.values, steps, plan, a, n)
            total += t
            total_sq += ts
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=min(workers, len(blocks))) as pool:
            futures = [
                pool.submit(_moment_block, kernel, initial.values, steps, plan, a, n)
                for a, n in blocks
            ]
            for fut in futures:
                t, ts = fut.result()
                total += t
                total_sq += ts
    mean = total / runs
    var = np.maximum(total_sq / runs - mean * mean, 0.0) * (runs / (runs - 1))
    return mean, np.sqrt(var)


def empirical_measure(samples: SampleSet, predicate: Callable[[DataState], bool]) -> float:
    """Fraction of samples satisfying the predicate."""
    hits = sum(1 for s in samples.states() if predicate(s))
    return hits / len(samples)


def save_trajectory(dest, traj: Trajectory) -> None:
    """CSV with a time column followed by one column per variable."""
    with open_sink(dest) as fh:
        fh.write("time," + ",".join(traj.space.names) + "\n")
        for i in range(traj.steps + 1):
            fh.write(str(i) + "," + ",".join("%.17g" % x for x in traj.values[i]) + "\n")


def save_estimate(dest, est: EvolutionEstimate) -> None:
    """CSV with run and time columns, rows ordered by (run, time)."""
    with open_sink(dest) as fh:
        fh.write("run,time," + ",".join(est.space.names) + "\n")
        for j in range(est.runs):
            for i in range(est.steps + 1):
                row = ",".join("%.17g" % x for x in est.values[i, j])
                fh.write(f"{j},{i},{row}\n")
