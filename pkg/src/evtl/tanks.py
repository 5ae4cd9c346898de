"""Three connected water tanks with a threshold inflow/outflow controller.

Tank 1 feeds tank 2, tank 2 feeds tank 3, through pipes whose flow follows
Torricelli's law on the level difference (signed, so water can flow back).
Tank 1's inflow and tank 3's outflow are stepped up or down by a bang-bang
controller that tries to hold the outer levels at the goal; tank 3 also
receives an uncontrolled stochastic inflow, drawn fresh each step
(scenario 1) or behaving as a clamped random walk (scenario 2).

State variables, in order: levels l1, l2, l3 and flows q1 (controlled
inflow to tank 1), q2 (stochastic inflow to tank 3), q0 (controlled outflow
from tank 3). Levels clamp to the tank range, flows to [0, max flow].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spaces import DataSpace, DataState, Interval, Penalty

__all__ = ["TankParams", "TankKernel", "tank_space", "tank_penalties", "initial_state"]


@dataclass(frozen=True)
class TankParams:
    """Physical and control parameters of the plant.

    ``inflow_variance`` is a variance (scenario 1 draws with std equal to
    its square root); ``band`` is the controller dead-band half-width. The
    balance equations apply flows scaled by dt / area per step.
    """

    level_min: float = 0.0
    level_max: float = 20.0
    goal: float = 10.0
    band: float = 0.5
    flow_max: float = 6.0
    flow_step: float = 1.2
    inflow_mean: float = 3.0
    inflow_variance: float = 0.5
    dt: float = 0.1
    area: float = 1.0
    pipe_area: float = 0.5
    loss12: float = 0.75
    loss23: float = 0.75
    gravity: float = 9.81

    def __post_init__(self) -> None:
        if not self.level_min < self.goal < self.level_max:
            raise ValueError("need level_min < goal < level_max")
        if self.flow_max <= 0 or not 0 < self.flow_step <= self.flow_max:
            raise ValueError("need 0 < flow_step <= flow_max")
        if self.band < 0 or self.inflow_variance < 0:
            raise ValueError("band and inflow variance must be non-negative")
        if min(self.dt, self.area, self.pipe_area, self.gravity) <= 0:
            raise ValueError("dt, area, pipe_area and gravity must be positive")
        if not (0 < self.loss12 <= 1 and 0 < self.loss23 <= 1):
            raise ValueError("loss coefficients must lie in (0, 1]")
        if not 0 <= self.inflow_mean <= self.flow_max:
            raise ValueError("inflow mean must lie in [0, flow_max]")


def tank_space(params: TankParams) -> DataSpace:
    lev = Interval(params.level_min, params.level_max)
    flow = Interval(0.0, params.flow_max)
    return DataSpace(
        [("l1", lev), ("l2", lev), ("l3", lev), ("q1", flow), ("q2", flow), ("q0", flow)]
    )


def initial_state(params: TankParams, space: DataSpace | None = None) -> DataState:
    """Plant at rest: every level at the bottom, every flow shut."""
    space = space or tank_space(params)
    m = params.level_min
    return space.state(l1=m, l2=m, l3=m, q1=0.0, q2=0.0, q0=0.0)


class TankKernel:
    """One-step transition of the plant under scenario 1 or 2."""

    def __init__(self, params: TankParams = TankParams(), scenario: int = 1):
        if scenario not in (1, 2):
            raise ValueError("scenario must be 1 or 2")
        self.params = params
        self.scenario = scenario
        self._space = tank_space(params)
        # flattened coefficients; the step runs a few million times per check
        p = params
        self._c12 = p.loss12 * p.pipe_area
        self._c23 = p.loss23 * p.pipe_area
        self._two_g = 2.0 * p.gravity
        self._scale = p.dt / p.area
        self._lo, self._hi = p.level_min, p.level_max
        self._qmax = p.flow_max
        self._hi_band = p.goal + p.band
        self._lo_band = p.goal - p.band
        self._qstep = p.flow_step
        self._inflow_std = math.sqrt(p.inflow_variance)

    @property
    def space(self) -> DataSpace:
        return self._space

    def initial_state(self) -> DataState:
        return initial_state(self.params, self._space)

    def step(self, state: DataState, rng: np.random.Generator) -> DataState:
        l1, l2, l3, q1, q2, q0 = state.values
        z = float(rng.standard_normal())

        d12 = l1 - l2
        q12 = math.copysign(self._c12 * math.sqrt(self._two_g * abs(d12)), d12)
        d23 = l2 - l3
        q23 = math.copysign(self._c23 * math.sqrt(self._two_g * abs(d23)), d23)

        s = self._scale
        nl1 = min(self._hi, max(self._lo, l1 + (q1 - q12) * s))
        nl2 = min(self._hi, max(self._lo, l2 + (q12 - q23) * s))
        nl3 = min(self._hi, max(self._lo, l3 + (q2 + q23 - q0) * s))

        if self.scenario == 1:
            nq2 = self.params.inflow_mean + self._inflow_std * z
        else:
            nq2 = q2 + z

        # controllers read the pre-update levels
        if l1 > self._hi_band:
            nq1 = max(0.0, q1 - self._qstep)
        elif l1 < self._lo_band:
            nq1 = min(self._qmax, q1 + self._qstep)
        else:
            nq1 = q1
        if l3 > self._hi_band:
            nq0 = min(self._qmax, q0 + self._qstep)
        elif l3 < self._lo_band:
            nq0 = max(0.0, q0 - self._qstep)
        else:
            nq0 = q0

        return DataState(
            self._space,
            (
                nl1,
                nl2,
                nl3,
                min(self._qmax, max(0.0, nq1)),
                min(self._qmax, max(0.0, nq2)),
                min(self._qmax, max(0.0, nq0)),
            ),
        )


def tank_penalties(params: TankParams) -> dict[str, Penalty]:
    """rho1..rho3: normalized distance of each level from the goal."""
    denom = max(params.level_max - params.goal, params.goal - params.level_min)
    goal = params.goal
    out: dict[str, Penalty] = {}
    for i, var in enumerate(("l1", "l2", "l3")):
        col = i
        out[f"rho{i + 1}"] = Penalty(
            f"rho{i + 1}",
            (var,),
            lambda d, _c=col: abs(d.values[_c] - goal) / denom,
            array_fn=lambda vals, tau, _c=col: np.abs(vals[:, _c] - goal) / denom,
        )
    return out
