"""Fully Eulerian cut-cell fluid-structure interaction with wall contact."""

from .assembly import PhysicalParams, StabilizationParams, StepProblem
from .config import RunConfig, load_config, parse_config
from .geometry import CutGeometry, LevelSet, classify
from .mesh import BackgroundMesh, build_graded_mesh, build_rect_mesh, build_uniform_mesh
from .qoi import QoIRecord, extract_qoi, sample_state, write_outputs
from .solver import NewtonConfig, NonConvergence, newton_solve
from .timeloop import Setup, SimulationAborted, TimeControl, advance_step, initial_state, run

__all__ = [
    "BackgroundMesh", "CutGeometry", "LevelSet", "NewtonConfig", "NonConvergence", "PhysicalParams",
    "QoIRecord", "RunConfig", "Setup", "SimulationAborted", "StabilizationParams", "StepProblem",
    "TimeControl", "advance_step", "build_graded_mesh", "build_rect_mesh", "build_uniform_mesh", "classify",
    "extract_qoi", "initial_state", "load_config", "newton_solve", "parse_config", "run", "sample_state",
    "write_outputs",
]
