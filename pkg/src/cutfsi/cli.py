"""Command-line entry point: ``python -m cutfsi <command>``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .assembly import StepProblem
from .audit import run_audit
from .config import PRESETS, ConfigError, RunConfig, load_config
from .fem import build_dof_layout, transfer
from .geometry import dump_classification
from .qoi import extract_qoi, sample_state, write_outputs
from .solver import NonConvergence, fd_jacobian_check
from .timeloop import SimulationAborted, advance_step, initial_state, next_geometry, run

log = logging.getLogger("cutfsi")

OUTPUT_ENV = "CUTFSI_OUTPUT_DIR"
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _mesh_override(text: str) -> list[str]:
    if text == "graded":
        return ["mesh.kind=graded"]
    kind, _, level = text.partition(":")
    if kind != "uniform" or not level.isdigit():
        raise UsageError(f"--mesh expects uniform:N or graded, got {text!r}")
    return ["mesh.kind=uniform", f"mesh.level={level}"]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--preset", choices=sorted(PRESETS), help="pinned benchmark setup")
    common.add_argument("--mesh", help="uniform:N or graded")
    common.add_argument("--tend", type=float, help="final time (s)")
    common.add_argument("--k0", type=float, help="initial and maximal time step (s)")
    common.add_argument("--output-dir", help=f"output directory (env {OUTPUT_ENV} overrides the config)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key, repeatable")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="cutfsi", description="Eulerian cut-cell FSI with wall contact")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate and write dist.csv / qoi.csv")
    cj = sub.add_parser("check-jacobian", parents=[common], help="finite-difference Jacobian check")
    cj.add_argument("--at", type=float, default=0.05, help="time of the snapshot (s)")
    cj.add_argument("--directions", type=int, default=10)
    sub.add_parser("audit-terms", parents=[common], help="compare each term with the quadrature oracle")
    sub.add_parser("dump-geometry", parents=[common], help="write the initial cell classification")
    return p


def make_config(args) -> RunConfig:
    overrides = []
    if args.mesh:
        overrides += _mesh_override(args.mesh)
    if args.tend is not None:
        overrides.append(f"time.t_end={args.tend}")
    if args.k0 is not None:
        overrides.append(f"time.k0={args.k0}")
    env_dir = os.environ.get(OUTPUT_ENV)
    if env_dir:
        overrides.append(f"output.dir={env_dir}")
    if args.output_dir:
        overrides.append(f"output.dir={args.output_dir}")
    overrides += args.set
    return load_config(args.config, overrides, args.preset)


def cmd_run(cfg: RunConfig) -> int:
    setup = cfg.build_setup()

    def progress(state):
        log.info("t=%.5f k=%.1e newton=%d contact=%d", state.t, state.k,
                 state.stats.iterations, state.stats.contact_points)

    result = run(setup, sampler=sample_state, progress=progress)
    samples = result.samples[::cfg.output.stride]
    n_dofs = initial_state(setup).layout.n_dofs
    qoi = extract_qoi(result.samples, cfg.stab.epsilon, result.mean_newton_iterations, n_dofs)
    paths = write_outputs(samples, qoi, cfg.output.dir)
    for key, value in qoi.as_dict().items():
        print(f"{key} = {value}")
    print(f"wrote {paths['dist.csv']} and {paths['qoi.csv']}")
    return EXIT_OK


def snapshot(setup, t_end: float):
    """March with the base step to ``t_end`` and return the last accepted state."""
    state = initial_state(setup)
    n = int(round(t_end / setup.k0))
    for _ in range(n):
        state = advance_step(setup, state, setup.k0, setup.newton.tol)
    return state


def jacobian_error(setup, at: float, directions: int = 10, seed: int = 1) -> float:
    """FD check on the step following the snapshot at ``at``, frozen geometry."""
    return state_jacobian_error(setup, snapshot(setup, at), directions, seed)


def state_jacobian_error(setup, state, directions: int = 10, seed: int = 1) -> float:
    """FD check on the step following ``state``.

    The linearisation point is the transferred state plus a small random
    perturbation, so that every term has a non-trivial derivative.
    """
    geom = next_geometry(setup, state)
    layout = build_dof_layout(setup.mesh, geom.fluid_ext, geom.solid_ext)
    prev = transfer(state.layout, layout, state.values)
    prob = StepProblem(geom, layout, prev, setup.params, setup.stab, setup.k0)
    scale = max(np.abs(prev).max(), 1e-3)
    x = prob.free(prev) + 1e-3 * scale * np.random.default_rng(seed).standard_normal(layout.n_free)
    return fd_jacobian_check(prob, x, directions)


def cmd_check_jacobian(cfg: RunConfig, at: float, directions: int) -> int:
    err = jacobian_error(cfg.build_setup(), at, directions)
    print(f"max relative error = {err:.3e} over {directions} directions (t = {at})")
    return EXIT_OK if err <= 1e-5 else EXIT_FAILURE


def cmd_audit() -> int:
    results = run_audit()
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.term:24s} {r.layout:6s} error={r.error:.2e} scale={r.scale:.2e}")
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAILURE


def cmd_dump_geometry(cfg: RunConfig) -> int:
    setup = cfg.build_setup()
    state = initial_state(setup)
    os.makedirs(cfg.output.dir, exist_ok=True)
    path = os.path.join(cfg.output.dir, "classification.csv")
    dump_classification(state.geom, path)
    g = state.geom
    print(f"cells={setup.mesh.n_cells} cut={len(g.cut_cells)} dofs={state.layout.n_dofs} "
          f"solid_area={g.solid_area():.9e} interface_length={g.interface_length():.9e}")
    print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "check-jacobian":
            return cmd_check_jacobian(cfg, args.at, args.directions)
        if args.command == "audit-terms":
            return cmd_audit()
        return cmd_dump_geometry(cfg)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergence, SimulationAborted) as exc:
        print(f"simulation failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
