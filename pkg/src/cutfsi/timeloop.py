"""Backward-Euler time stepping on moving cut domains with adaptive step control."""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import AssemblyError, PhysicalParams, StabilizationParams, StepProblem
from .fem import DofLayout, build_dof_layout, transfer
from .geometry import CutGeometry, GeometryError, LevelSet, classify, interface_within, motion_constraint_ok
from .mesh import BackgroundMesh
from .solver import NewtonConfig, NewtonStats, NonConvergence, newton_solve

log = logging.getLogger(__name__)


class SimulationAborted(RuntimeError):
    """The step size fell below its floor or a run budget was exhausted."""


@dataclass
class Setup:
    """Everything a run needs besides the time-control state."""

    mesh: BackgroundMesh
    levelset: LevelSet
    params: PhysicalParams = field(default_factory=PhysicalParams)
    stab: StabilizationParams = field(default_factory=StabilizationParams)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    k0: float = 1.0e-4
    t_end: float = 0.6
    alpha_k: float = 0.1
    extension: str = "face"
    normal_mode: str = "levelset"
    max_steps: int | None = None
    max_wall_time: float | None = None

    def __post_init__(self):
        if not self.k0 > 0:
            raise ValueError("k0 must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if not 0 < self.alpha_k < 1 or abs(1 / self.alpha_k - round(1 / self.alpha_k)) > 1e-9:
            raise ValueError("alpha_k must be 1/n for an integer n > 1")
        if self.levelset.mesh is None:
            self.levelset.mesh = self.mesh


@dataclass
class AcceptedState:
    """A converged step: coefficients on the layout of the geometry they were solved on."""

    t: float
    k: float
    geom: CutGeometry
    layout: DofLayout
    values: np.ndarray
    stats: NewtonStats | None = None
    next_geom: CutGeometry | None = None   # domain of the following step, if already known

    def displacement_vertices(self) -> np.ndarray:
        return self.layout.nodal_values("u", self.values)


def _layout(setup: Setup, geom: CutGeometry) -> DofLayout:
    return build_dof_layout(setup.mesh, geom.fluid_ext, geom.solid_ext if geom.has_solid else
                            np.zeros(setup.mesh.n_cells, bool), pin_pressure=not geom.has_solid)


def _geometry(setup: Setup, levelset: LevelSet) -> CutGeometry:
    return classify(setup.mesh, levelset, setup.normal_mode, setup.extension)


def initial_state(setup: Setup) -> AcceptedState:
    """Fluid and solid at rest, undeformed, at t = 0."""
    geom = _geometry(setup, setup.levelset)
    layout = _layout(setup, geom)
    return AcceptedState(0.0, 0.0, geom, layout, np.zeros(layout.n_dofs))


def next_geometry(setup: Setup, state: AcceptedState) -> CutGeometry:
    """Domain of the step after ``state``: the initial level set moved by its displacement."""
    if state.next_geom is None:
        if not state.geom.has_solid:
            state.next_geom = state.geom
        else:
            ls = setup.levelset.moved(state.displacement_vertices(), state.geom.solid_ext)
            state.next_geom = _geometry(setup, ls)
    return state.next_geom


def solid_speed(state: AcceptedState) -> float:
    f = state.layout.fields["vs"]
    d = f.node_dof[f.node_dof[:, 0] >= 0]
    if len(d) == 0:
        return 0.0
    return float(np.max(np.linalg.norm(state.values[d], axis=1)))


def advance_step(setup: Setup, prev: AcceptedState, k: float, tol: float) -> AcceptedState:
    """One backward-Euler step of size ``k`` from ``prev``; raises ``NonConvergence``."""
    h = float(setup.mesh.cell_h.min())
    if not motion_constraint_ok(k, solid_speed(prev), h):
        raise NonConvergence("layer", f"k |v_s| exceeds one cell (h={h:.3g})")
    try:
        geom = next_geometry(setup, prev)
    except GeometryError as exc:
        raise NonConvergence("geometry", str(exc)) from exc
    if not interface_within(geom, prev.geom):
        raise NonConvergence("layer", "new domain leaves the previous extension band")
    layout = _layout(setup, geom)
    start = transfer(prev.layout, layout, prev.values)
    cfg = NewtonConfig(tol=tol, max_iter=setup.newton.max_iter, contraction=setup.newton.contraction,
                       max_halvings=setup.newton.max_halvings,
                       sufficient_decrease=setup.newton.sufficient_decrease)
    try:
        prob = StepProblem(geom, layout, start, setup.params, setup.stab, k)
        x, stats = newton_solve(prob, prob.free(start), cfg, label=f"t={prev.t + k:.6g}")
    except AssemblyError as exc:
        raise NonConvergence("assembly", str(exc)) from exc
    state = AcceptedState(prev.t + k, k, geom, layout, prob.full(x), stats)
    # post-solve check: the domain implied by the new displacement must stay in the band
    try:
        nxt = next_geometry(setup, state)
    except GeometryError as exc:
        raise NonConvergence("geometry", str(exc)) from exc
    if not interface_within(nxt, geom):
        raise NonConvergence("layer", "solid moved more than one cell layer")
    return state


# -- adaptive step control ---------------------------------------------------------


@dataclass
class TimeControl:
    """Step size, Newton tolerance and the rollback buffer.

    Time is counted in integer ticks of ``k0 * alpha_k**4`` so that emitted
    samples land exactly on the ``k0`` grid.
    """

    k0: float
    tol0: float
    alpha_k: float = 0.1
    rollback_depth: int = 5
    clean_to_coarsen: int = 10
    min_level: int = 4
    level: int = 0                       # k = k0 * alpha_k**level
    steps_since_refinement: int | None = None   # None: never refined
    clean_steps: int = 0
    buffer: deque = field(default_factory=deque)
    trace: list = field(default_factory=list)

    @property
    def ratio(self) -> int:
        return int(round(1 / self.alpha_k))

    @property
    def k_ticks(self) -> int:
        return self.ratio ** (self.min_level - self.level)

    @property
    def k0_ticks(self) -> int:
        return self.ratio ** self.min_level

    @property
    def unit(self) -> float:
        return self.k0 / self.k0_ticks

    @property
    def k(self) -> float:
        return self.k_ticks * self.unit

    @property
    def tol(self) -> float:
        return self.tol0 * self.alpha_k ** self.level

    def push(self, ticks: int, state) -> None:
        self.buffer.append((ticks, state))
        while len(self.buffer) > self.rollback_depth:
            self.buffer.popleft()

    def on_failure(self, ticks: int, cause: str) -> int:
        """Refine k and pick the state to restart from; returns the number of states dropped.

        ``ticks`` is the target time of the failed step.  Without a refinement
        in the previous five steps the run restarts five steps before that
        time (the oldest buffered state), otherwise from the last accepted one.
        """
        self.level += 1
        if self.level > self.min_level:
            raise SimulationAborted(f"step size below k0 * alpha_k^{self.min_level} at tick {ticks} ({cause})")
        fresh = self.steps_since_refinement is None or self.steps_since_refinement >= self.rollback_depth
        dropped = 0
        if fresh:
            while len(self.buffer) > 1:
                self.buffer.pop()
                dropped += 1
        self.steps_since_refinement = 0
        self.clean_steps = 0
        self.trace.append(("refine", ticks, self.k, self.buffer[-1][0]))
        return dropped

    def on_success(self, ticks: int, state) -> None:
        self.push(ticks, state)
        self.trace.append(("accept", ticks, self.k))
        if self.steps_since_refinement is not None:
            self.steps_since_refinement += 1
        if self.level == 0:
            return
        self.clean_steps += 1
        coarser = self.k_ticks * self.ratio
        if self.clean_steps >= self.clean_to_coarsen and ticks % coarser == 0:
            self.level -= 1
            self.clean_steps = 0
            self.trace.append(("coarsen", ticks, self.k))


@dataclass
class RunResult:
    samples: list
    control: TimeControl
    final: object
    accepted_steps: int = 0
    newton_iterations: int = 0
    wall_time: float = 0.0

    @property
    def mean_newton_iterations(self) -> float:
        return self.newton_iterations / self.accepted_steps if self.accepted_steps else float("nan")


def run_policy(step: Callable, initial, t_end: float, control: TimeControl,
               sampler: Callable | None = None, max_steps: int | None = None,
               max_wall_time: float | None = None, iterations: Callable | None = None) -> RunResult:
    """Generic adaptive loop.

    ``step(state, t, k, tol)`` returns the next state or raises
    ``NonConvergence``.  ``sampler(state, t)`` is called at t = 0 and at
    every multiple of ``k0``; samples later than a rollback target are
    discarded and recomputed.  A zero-length run emits nothing.
    """
    t0 = time.perf_counter()
    end_ticks = int(round(t_end / control.unit))
    samples = []
    ticks = 0
    state = initial
    control.push(0, state)
    if sampler is not None and end_ticks > 0:
        samples.append((0, sampler(state, 0.0)))
    accepted = n_iter = attempts = 0
    while ticks < end_ticks:
        if max_steps is not None and attempts >= max_steps:
            raise SimulationAborted(f"step budget {max_steps} exhausted at t={ticks * control.unit:.6g}")
        if max_wall_time is not None and time.perf_counter() - t0 > max_wall_time:
            raise SimulationAborted(f"wall-clock budget exhausted at t={ticks * control.unit:.6g}")
        attempts += 1
        k_ticks = min(control.k_ticks, end_ticks - ticks)
        try:
            new = step(state, ticks * control.unit, k_ticks * control.unit, control.tol)
        except NonConvergence as exc:
            log.info("step at t=%.6g k=%.3g failed (%s)", ticks * control.unit, control.k, exc)
            control.on_failure(ticks + k_ticks, exc.cause)
            ticks, state = control.buffer[-1]
            while samples and samples[-1][0] > ticks:
                samples.pop()
            continue
        ticks += k_ticks
        state = new
        accepted += 1
        if iterations is not None:
            n_iter += iterations(new)
        control.on_success(ticks, state)
        if sampler is not None and ticks % control.k0_ticks == 0:
            samples.append((ticks, sampler(state, ticks * control.unit)))
    return RunResult([rec for _, rec in samples], control, state, accepted, n_iter,
                     time.perf_counter() - t0)


def run(setup: Setup, sampler: Callable | None = None,
        inject_failure: Callable[[int, float, float], bool] | None = None,
        progress: Callable | None = None) -> RunResult:
    """Simulate from rest to ``setup.t_end``.

    ``sampler(setup, state, t)`` produces one record per emitted sample.
    ``inject_failure(attempt, t, k)`` may force a step to fail (testing).
    """
    control = TimeControl(setup.k0, setup.newton.tol, setup.alpha_k)
    counter = {"attempt": 0}

    def step(state, t, k, tol):
        counter["attempt"] += 1
        if inject_failure is not None and inject_failure(counter["attempt"], t, k):
            raise NonConvergence("injected")
        new = advance_step(setup, state, k, tol)
        if progress is not None:
            progress(new)
        return new

    def sample(state, t):
        return sampler(setup, state, t) if sampler is not None else {"t": t}

    def iterations(state):
        return state.stats.iterations if state.stats is not None else 0

    return run_policy(step, initial_state(setup), setup.t_end, control, sample,
                      setup.max_steps, setup.max_wall_time, iterations)
