"""Finite-dimensional data spaces, states, and penalty functions.

A data space fixes an ordered set of named real variables, each ranging over
its own domain (a closed interval or a finite set of reals). States are
immutable assignments of one in-domain value per variable. A penalty scores a
state in [0, 1] by how far it is from some target condition; penalties induce
the one-sided gap used everywhere else in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "Interval",
    "FiniteSet",
    "DataSpace",
    "DataState",
    "SampleSet",
    "Penalty",
    "penalty_gap",
    "identity_penalty",
    "save_samples",
    "load_samples",
]


@dataclass(frozen=True)
class Interval:
    """Closed real interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError("interval bounds must be finite")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def clamp(self, x: float) -> float:
        return min(self.hi, max(self.lo, x))

    def clamp_array(self, xs: np.ndarray) -> np.ndarray:
        return np.clip(xs, self.lo, self.hi)


@dataclass(frozen=True)
class FiniteSet:
    """Finite set of admissible real values, kept sorted and distinct."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(sorted(float(v) for v in self.values))
        if not vals:
            raise ValueError("finite domain needs at least one value")
        if len(set(vals)) != len(vals):
            raise ValueError("finite domain values must be distinct")
        object.__setattr__(self, "values", vals)

    def contains(self, x: float) -> bool:
        return any(x == v for v in self.values)

    def clamp(self, x: float) -> float:
        """Snap to the nearest admissible value (ties go low)."""
        arr = np.asarray(self.values)
        return float(arr[np.argmin(np.abs(arr - x))])

    def clamp_array(self, xs: np.ndarray) -> np.ndarray:
        arr = np.asarray(self.values)
        idx = np.argmin(np.abs(xs[..., None] - arr[None, :]), axis=-1)
        return arr[idx]


Domain = Interval | FiniteSet


class DataSpace:
    """Ordered collection of named variables with their domains."""

    __slots__ = ("names", "domains", "_index")

    def __init__(self, variables: Mapping[str, Domain] | Sequence[tuple[str, Domain]]):
        items = list(variables.items()) if isinstance(variables, Mapping) else list(variables)
        if not items:
            raise ValueError("a data space needs at least one variable")
        names = tuple(name for name, _ in items)
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names")
        self.names: tuple[str, ...] = names
        self.domains: tuple[Domain, ...] = tuple(dom for _, dom in items)
        self._index = {name: i for i, name in enumerate(names)}

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}; space has {', '.join(self.names)}") from None

    def domain(self, name: str) -> Domain:
        return self.domains[self.index(name)]

    def state(self, values: Mapping[str, float] | None = None, **kwargs: float) -> "DataState":
        """Build a state from a full mapping of variable values.

        Every variable must be given exactly once and lie in its domain.
        """
        given = dict(values or {})
        given.update(kwargs)
        extra = set(given) - set(self.names)
        if extra:
            raise KeyError(f"unknown variables: {sorted(extra)}")
        missing = set(self.names) - set(given)
        if missing:
            raise KeyError(f"missing variables: {sorted(missing)}")
        vec = tuple(float(given[name]) for name in self.names)
        for name, dom, x in zip(self.names, self.domains, vec):
            if not dom.contains(x):
                raise ValueError(f"value {x} out of domain for variable {name!r}")
        return DataState(self, vec)

    def state_from_vector(self, vec: Sequence[float], check: bool = True) -> "DataState":
        tup = tuple(float(x) for x in vec)
        if len(tup) != self.dim:
            raise ValueError(f"expected {self.dim} values, got {len(tup)}")
        if check:
            for name, dom, x in zip(self.names, self.domains, tup):
                if not dom.contains(x):
                    raise ValueError(f"value {x} out of domain for variable {name!r}")
        return DataState(self, tup)

    def contains_vector(self, vec: Sequence[float]) -> bool:
        return all(dom.contains(float(x)) for dom, x in zip(self.domains, vec))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, DataSpace)
            and self.names == other.names
            and self.domains == other.domains
        )

    def __hash__(self) -> int:
        return hash((self.names, self.domains))

    def __repr__(self) -> str:
        return f"DataSpace({', '.join(self.names)})"


class DataState:
    """Immutable point of a data space. Access values by variable name."""

    __slots__ = ("space", "values")

    def __init__(self, space: DataSpace, values: tuple[float, ...]):
        self.space = space
        self.values = values

    def __getitem__(self, name: str) -> float:
        return self.values[self.space.index(name)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.space.names, self.values))

    def replace(self, **changes: float) -> "DataState":
        d = self.as_dict()
        d.update(changes)
        return self.space.state(d)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, DataState)
            and self.space == other.space
            and self.values == other.values
        )

    def __hash__(self) -> int:
        return hash((self.space, self.values))

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}={v:g}" for n, v in zip(self.space.names, self.values))
        return f"DataState({inner})"


class SampleSet:
    """A batch of states of one space, stored as an (N, dim) float array.

    Row order is meaningful: estimation code relies on row j of every per-step
    sample set belonging to simulation run j.
    """

    __slots__ = ("space", "values")

    def __init__(self, space: DataSpace, values: np.ndarray):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != space.dim:
            raise ValueError(f"expected an (N, {space.dim}) array, got shape {arr.shape}")
        self.space = space
        self.values = arr

    @classmethod
    def from_states(cls, states: Sequence[DataState]) -> "SampleSet":
        if not states:
            raise ValueError("empty sample set")
        space = states[0].space
        if any(s.space != space for s in states):
            raise ValueError("mixed spaces in one sample set")
        return cls(space, np.array([s.values for s in states], dtype=np.float64))

    def __len__(self) -> int:
        return self.values.shape[0]

    def state(self, i: int) -> DataState:
        return DataState(self.space, tuple(float(x) for x in self.values[i]))

    def states(self) -> Iterator[DataState]:
        for i in range(len(self)):
            yield self.state(i)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.space.index(name)]

    def take(self, n: int) -> "SampleSet":
        """First n rows, preserving stored order."""
        if n > len(self):
            raise ValueError(f"cannot take {n} of {len(self)} samples")
        return SampleSet(self.space, self.values[:n])

    def __repr__(self) -> str:
        return f"SampleSet(n={len(self)}, space={self.space!r})"


class Penalty:
    """Named scoring function mapping states into [0, 1].

    ``fn`` takes a state (and the time index too when ``time_dependent``).
    ``array_fn``, when given, must map an (N, dim) value array and a time
    index to N raw scores; it exists so projections of large sample sets stay
    vectorized. Raw scores are clamped into [0, 1] on the way out.
    """

    __slots__ = ("name", "variables", "fn", "time_dependent", "array_fn")

    def __init__(
        self,
        name: str,
        variables: Iterable[str],
        fn: Callable[..., float],
        *,
        time_dependent: bool = False,
        array_fn: Callable[[np.ndarray, int], np.ndarray] | None = None,
    ):
        self.name = name
        self.variables = tuple(variables)
        self.fn = fn
        self.time_dependent = time_dependent
        self.array_fn = array_fn

    def __call__(self, state: DataState, tau: int = 0) -> float:
        raw = self.fn(state, tau) if self.time_dependent else self.fn(state)
        return min(1.0, max(0.0, float(raw)))

    def project(self, samples: SampleSet, tau: int = 0) -> np.ndarray:
        """Penalty of every sample, as a length-N array in [0, 1]."""
        if self.array_fn is not None:
            raw = np.asarray(self.array_fn(samples.values, tau), dtype=np.float64)
            if raw.shape != (len(samples),):
                raise ValueError("array_fn returned a wrong-shaped result")
        else:
            raw = np.array([self(s, tau) for s in samples.states()], dtype=np.float64)
        return np.clip(raw, 0.0, 1.0)

    def __repr__(self) -> str:
        return f"Penalty({self.name!r})"


def penalty_gap(penalty: Penalty, d_from: DataState, d_to: DataState, tau: int = 0) -> float:
    """One-sided penalty gap max(rho(d_to) - rho(d_from), 0).

    Zero when the second state scores no worse than the first; this is a
    hemimetric on states (identity and triangle hold, symmetry does not).
    """
    return max(penalty(d_to, tau) - penalty(d_from, tau), 0.0)


def identity_penalty(space: DataSpace, variable: str, name: str | None = None) -> Penalty:
    """Penalty reading one variable directly (clamped into [0, 1])."""
    col = space.index(variable)
    return Penalty(
        name or variable,
        (variable,),
        lambda d: d.values[col],
        array_fn=lambda vals, tau: vals[:, col],
    )


def save_samples(dest, samples: SampleSet) -> None:
    """Write a sample set as CSV: header of variable names, one row per sample."""
    from ._io import open_sink

    with open_sink(dest) as fh:
        fh.write(",".join(samples.space.names) + "\n")
        for row in samples.values:
            fh.write(",".join("%.17g" % x for x in row) + "\n")


def load_samples(path: str, space: DataSpace | None = None) -> SampleSet:
    """Read a sample-set CSV written by :func:`save_samples`.

    Without a space, one is inferred whose domains are the per-column sample
    ranges. With a space, columns are mapped to its variables by header name
    (order does not matter) and variables absent from the file default to
    their domain minimum.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise ValueError(f"{path}: empty sample file")
        names = [c.strip() for c in header.split(",")]
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(names):
                raise ValueError(f"{path}:{lineno}: expected {len(names)} columns")
            rows.append([float(p) for p in parts])
    if not rows:
        raise ValueError(f"{path}: no sample rows")
    data = np.asarray(rows, dtype=np.float64)
    if space is None:
        doms = [
            (n, Interval(float(np.min(data[:, i])), float(np.max(data[:, i]))))
            for i, n in enumerate(names)
        ]
        return SampleSet(DataSpace(doms), data)
    out = np.empty((data.shape[0], space.dim))
    for j, name in enumerate(space.names):
        if name in names:
            out[:, j] = data[:, names.index(name)]
        else:
            dom = space.domains[j]
            out[:, j] = dom.lo if isinstance(dom, Interval) else dom.values[0]
    return SampleSet(space, out)
