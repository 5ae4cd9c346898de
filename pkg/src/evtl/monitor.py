"""Statistical robustness monitoring of formulas over evolution estimates.

Evaluation walks the formula tree once per node, producing a robustness
value in [-1, 1] for every start index 0..k of the estimate. Atom values
come from one-sided distances between freshly sampled reference
distributions and the estimated per-step samples; Boolean and temporal
structure is pure array algebra on the children's series.

Atom sampling draws from RNG streams keyed by the atom's printed form and
the time index, never by its position in the tree. Two consequences, both
deliberate: repeated atoms share draws, and the double-negation / De Morgan
identities hold exactly on the computed series, not just in distribution.

A start index is only trustworthy when the formula's whole window fits into
the simulated horizon: index i is reliable iff i + horizon(phi) <= k. Later
indices still get values (the truncated windows simply see fewer candidate
times) but are flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ._io import open_sink
from .formulas import (
    Discount,
    Formula,
    Hazard,
    Not,
    Or,
    Target,
    Truth,
    Until,
    content_words,
    horizon,
    validate,
)
from .simulation import EvolutionEstimate, MarkovKernel, RandomnessPlan, estimate
from .spaces import DataState
from .wasserstein import one_sided_wasserstein

__all__ = [
    "UntilMode",
    "RobustnessSeries",
    "until_combine",
    "evaluate",
    "CheckResult",
    "check_formula",
    "save_series",
]

UntilMode = Literal["semantics", "figure"]


@dataclass(frozen=True)
class RobustnessSeries:
    """Robustness of one formula at every start index of an estimate."""

    values: np.ndarray
    formula_horizon: int
    until_mode: str = "semantics"

    @property
    def steps(self) -> int:
        return len(self.values) - 1

    @property
    def value(self) -> float:
        """Robustness at time 0, the usual verdict."""
        return float(self.values[0])

    def reliable(self, i: int) -> bool:
        return i + self.formula_horizon <= self.steps

    @property
    def reliable_steps(self) -> int:
        """Number of leading indices whose full window fits the horizon."""
        return max(self.steps - self.formula_horizon + 1, 0)

    @property
    def reliable_mask(self) -> np.ndarray:
        return np.arange(self.steps + 1) < self.reliable_steps


def until_combine(
    left: np.ndarray,
    right: np.ndarray,
    lo: int,
    hi: int,
    mode: UntilMode = "semantics",
) -> np.ndarray:
    """Series-level bounded until.

    For each start index i, candidates are the window offsets tau' in
    [i+lo, i+hi] clipped to the series end; each contributes the min of the
    right series at tau' and a running min of the left series, and the
    result is the best candidate (-1 when the clipped window is empty).

    The two modes differ in the left-min's range: ``semantics`` uses the
    half-open [i+lo, tau') (empty at the first offset), ``figure`` uses the
    inclusive [i, tau'].
    """
    if left.shape != right.shape:
        raise ValueError("series lengths differ")
    k = len(left) - 1
    out = np.full(k + 1, -1.0)
    for i in range(k + 1):
        best = -1.0
        if mode == "semantics":
            run = 1.0
            for j in range(i + lo, min(i + hi, k) + 1):
                best = max(best, min(float(right[j]), run))
                run = min(run, float(left[j]))
        elif mode == "figure":
            run = 1.0
            for j in range(i, min(i + hi, k) + 1):
                run = min(run, float(left[j]))
                if j >= i + lo:
                    best = max(best, min(float(right[j]), run))
        else:
            raise ValueError(f"unknown until mode {mode!r}")
        out[i] = best
    return out


def _atom_values(
    atom: Target | Hazard,
    est: EvolutionEstimate,
    base_runs: int,
    plan: RandomnessPlan,
    discount: Discount,
) -> np.ndarray:
    ratio = est.runs // base_runs
    words = content_words(atom)
    out = np.empty(est.steps + 1)
    for i in range(est.steps + 1):
        rng = plan.substream(1, *words, i)
        if isinstance(atom, Target):
            ref = atom.dist.sample(est.space, base_runs, rng)
            dist = one_sided_wasserstein(ref, est.at(i), atom.penalty, i)
            out[i] = atom.threshold - discount(i) * dist
        else:
            ref = atom.dist.sample(est.space, ratio * base_runs, rng)
            dist = one_sided_wasserstein(est.at(i).take(base_runs), ref, atom.penalty, i)
            out[i] = discount(i) * dist - atom.threshold
    return out


def evaluate(
    est: EvolutionEstimate,
    formula: Formula,
    base_runs: int,
    plan: RandomnessPlan,
    discount: Discount = Discount(),
    until_mode: UntilMode = "semantics",
) -> RobustnessSeries:
    """Robustness series of a formula over an existing estimate.

    ``base_runs`` is the reference sample size N; the estimate must hold
    l*N runs for an integer oversampling ratio l >= 1. Target atoms compare
    N reference samples against all l*N estimate samples; hazard atoms
    compare the first N estimate samples against l*N reference samples.
    """
    if base_runs < 1 or est.runs % base_runs != 0:
        raise ValueError(f"estimate holds {est.runs} runs, not a multiple of N={base_runs}")
    validate(formula, est.space)
    cache: dict[Formula, np.ndarray] = {}

    def walk(f: Formula) -> np.ndarray:
        got = cache.get(f)
        if got is None:
            cache[f] = got = compute(f)
        return got

    def compute(f: Formula) -> np.ndarray:
        match f:
            case Truth():
                return np.ones(est.steps + 1)
            case Target() | Hazard():
                return _atom_values(f, est, base_runs, plan, discount)
            case Not(child=c):
                return -walk(c)
            case Or(left=l, right=r):
                return np.maximum(walk(l), walk(r))
            case Until(left=l, right=r, lo=lo, hi=hi):
                return until_combine(walk(l), walk(r), lo, hi, until_mode)
        raise TypeError(f"not a formula: {f!r}")

    return RobustnessSeries(walk(formula), horizon(formula), until_mode)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of checking one formula against one system."""

    series: RobustnessSeries
    formula: Formula
    base_runs: int
    ratio: int
    estimate: EvolutionEstimate = field(repr=False)

    @property
    def robustness(self) -> float:
        return self.series.value

    @property
    def satisfied(self) -> bool | None:
        """Sign verdict at time 0; None when the robustness is exactly 0."""
        r = self.robustness
        if r == 0.0:
            return None
        return r > 0.0


def check_formula(
    kernel: MarkovKernel,
    initial: DataState,
    formula: Formula,
    base_runs: int,
    ratio: int,
    plan: RandomnessPlan,
    steps: int | None = None,
    discount: Discount = Discount(),
    until_mode: UntilMode = "semantics",
    workers: int = 1,
) -> CheckResult:
    """Estimate the system for ratio * N runs and score the formula.

    ``steps`` defaults to the formula horizon, the shortest run for which
    the verdict at time 0 is reliable.
    """
    if ratio < 1:
        raise ValueError("oversampling ratio must be >= 1")
    k = horizon(formula) if steps is None else steps
    est = estimate(kernel, initial, k, ratio * base_runs, plan, workers=workers)
    series = evaluate(est, formula, base_runs, plan, discount, until_mode)
    return CheckResult(series, formula, base_runs, ratio, est)


def save_series(dest, series: RobustnessSeries) -> None:
    """CSV of the series: time, robustness, reliable flag."""
    with open_sink(dest) as fh:
        fh.write("time,robustness,reliable\n")
        for i, v in enumerate(series.values):
            fh.write("%d,%.17g,%d\n" % (i, v, int(series.reliable(i))))
