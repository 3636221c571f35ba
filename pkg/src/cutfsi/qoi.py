"""Benchmark metrics, energies and CSV output."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from .assembly import PhysicalParams, StabilizationParams
from .assembly import engine
from .assembly.params import fluid_stress, green_lagrange, solid_stress
from .fem import evaluate_basis
from .geometry import CutGeometry, wall_gap

H0 = 0.039            # centroid height that starts the measurement window
DIAMETER = 0.022      # wall distance that ends it
PROBE = (0.0, 0.0)    # bottom centre pressure probe
REBOUND_THRESHOLD = 0.5   # rise above the post-contact minimum, in units of epsilon

SAMPLE_COLUMNS = ("t", "k", "min_dist", "centroid_y", "vs_mean_y", "force_y", "E_el", "E_kin_f",
                  "E_kin_s", "p_bc", "max_vf", "contact_points", "newton_iterations")


def min_wall_distance(geom: CutGeometry) -> float:
    """Smallest wall gap over the reconstructed interface (segment end points and quadrature points)."""
    pts = [geom.iface.points]
    if len(geom.segments):
        pts.append(geom.segments.reshape(-1, 2))
    pts = np.concatenate(pts)
    if len(pts) == 0:
        return math.inf
    return float(wall_gap(pts).min())


def solid_centroid(geom: CutGeometry) -> np.ndarray:
    q = geom.vol_s
    area = q.weights.sum()
    if area == 0:
        return np.full(2, np.nan)
    return (q.points * q.weights[:, None]).sum(axis=0) / area


def _field(table, name, values):
    return engine.evaluate_field(table, name, values)


def vertical_interface_force(layout, values, geom: CutGeometry, params: PhysicalParams) -> float:
    """``int_Gamma (sigma_f n_f) . e2`` with ``n_f`` pointing from the fluid into the solid."""
    if len(geom.iface) == 0:
        return 0.0
    tab = engine.build_table("iface", geom.iface, layout, ("vf", "p"))
    v = _field(tab, "vf", values)
    p = _field(tab, "p", values)[:, 0, 0]
    sigma = fluid_stress(v[:, :, 1:3], p, params)
    n_f = -geom.iface.normals
    return float(np.sum(tab.weights * np.einsum("qj,qj->q", sigma[:, 1, :], n_f)))


def energies(layout, values, geom: CutGeometry, params: PhysicalParams) -> tuple[float, float, float]:
    """Elastic energy and the fluid and solid kinetic energies."""
    e_el = e_f = e_s = 0.0
    if len(geom.vol_s):
        tab = engine.build_table("vol_s", geom.vol_s, layout, ("vs", "u"))
        H = _field(tab, "u", values)[:, :, 1:3]
        E = green_lagrange(H)
        S = solid_stress(H, params)
        e_el = float(np.sum(tab.weights * np.einsum("qij,qij->q", S, E)))
        vs = _field(tab, "vs", values)[:, :, 0]
        e_s = float(0.5 * params.rho_s * np.sum(tab.weights * np.sum(vs ** 2, axis=1)))
    if len(geom.vol_f):
        tab = engine.build_table("vol_f", geom.vol_f, layout, ("vf",))
        vf = _field(tab, "vf", values)[:, :, 0]
        e_f = float(0.5 * params.rho_f * np.sum(tab.weights * np.sum(vf ** 2, axis=1)))
    return e_el, e_f, e_s


def solid_mean_velocity(layout, values, geom: CutGeometry) -> np.ndarray:
    if len(geom.vol_s) == 0:
        return np.full(2, np.nan)
    tab = engine.build_table("vol_s", geom.vol_s, layout, ("vs",))
    vs = _field(tab, "vs", values)[:, :, 0]
    return (vs * tab.weights[:, None]).sum(axis=0) / tab.weights.sum()


def max_fluid_speed(layout, values, geom: CutGeometry) -> float:
    if len(geom.vol_f) == 0:
        return 0.0
    tab = engine.build_table("vol_f", geom.vol_f, layout, ("vf",))
    vf = _field(tab, "vf", values)[:, :, 0]
    return float(np.max(np.linalg.norm(vf, axis=1)))


def pressure_at(layout, values, point) -> float:
    """Pressure interpolant at ``point`` (the containing cell must carry pressure DoFs)."""
    mesh = layout.mesh
    pt = np.atleast_2d(np.asarray(point, dtype=float))
    cell = mesh.locate(pt)
    dofs = layout.cell_dofs("p", cell)[0]
    if np.any(dofs < 0):
        return math.nan
    b = evaluate_basis(mesh, cell, pt, 1)
    return float(b.values[0] @ values[dofs])


def sample_state(setup, state, t: float) -> dict:
    """One row of the trajectory table, evaluated on the domain the state was solved on."""
    geom, layout, x = state.geom, state.layout, state.values
    params = setup.params
    e_el, e_f, e_s = energies(layout, x, geom, params)
    stats = state.stats
    return {
        "t": t,
        "k": state.k,
        "min_dist": min_wall_distance(geom),
        "centroid_y": float(solid_centroid(geom)[1]),
        "vs_mean_y": float(solid_mean_velocity(layout, x, geom)[1]),
        "force_y": vertical_interface_force(layout, x, geom, params),
        "E_el": e_el,
        "E_kin_f": e_f,
        "E_kin_s": e_s,
        "p_bc": pressure_at(layout, x, PROBE),
        "max_vf": max_fluid_speed(layout, x, geom),
        "contact_points": stats.contact_points if stats is not None else 0,
        "newton_iterations": stats.iterations if stats is not None else 0,
    }


# -- event extraction ------------------------------------------------------------------


@dataclass
class QoIRecord:
    t0: float = math.nan
    t_star: float = math.nan
    v_star: float = math.nan            # mean solid vertical velocity at t0 + t*
    v_star_avg: float = math.nan        # centroid displacement over [t0, t0 + t*] divided by t*
    f_star: float = math.nan
    t_cont: float = math.nan
    t_jump: float = math.nan
    h_jump: float = math.nan
    p_bc_max: float = math.nan
    max_vf: float = math.nan
    E_el_max: float = math.nan
    E_kin_f_max: float = math.nan
    E_kin_s_max: float = math.nan
    newton_mean: float = math.nan
    n_dofs: int = 0

    @property
    def rebound(self) -> bool:
        return not math.isnan(self.h_jump)

    def as_dict(self) -> dict:
        return asdict(self)


def first_crossing(t: np.ndarray, y: np.ndarray, level: float) -> float:
    """First time ``y`` reaches ``level`` from above, linearly interpolated; nan if never."""
    below = np.flatnonzero(y <= level)
    if len(below) == 0:
        return math.nan
    i = below[0]
    if i == 0:
        return float(t[0])
    y0, y1 = y[i - 1], y[i]
    s = (y0 - level) / (y0 - y1)
    return float(t[i - 1] + s * (t[i] - t[i - 1]))


def interpolate(t: np.ndarray, y: np.ndarray, at: float) -> float:
    if math.isnan(at) or len(t) == 0 or at > t[-1]:
        return math.nan
    return float(np.interp(at, t, y))


def extract_qoi(samples: list[dict], epsilon: float = 1.0e-4, newton_mean: float = math.nan,
                n_dofs: int = 0) -> QoIRecord:
    rec = QoIRecord(newton_mean=newton_mean, n_dofs=n_dofs)
    if not samples:
        return rec
    col = {c: np.array([s[c] for s in samples], dtype=float) for c in SAMPLE_COLUMNS if c in samples[0]}
    t = col["t"]
    rec.p_bc_max = float(np.nanmax(col["p_bc"])) if "p_bc" in col else math.nan
    for name, key in (("max_vf", "max_vf"), ("E_el_max", "E_el"), ("E_kin_f_max", "E_kin_f"),
                      ("E_kin_s_max", "E_kin_s")):
        if key in col:
            setattr(rec, name, float(np.nanmax(col[key])))

    t0 = first_crossing(t, col["centroid_y"], H0)
    rec.t0 = t0
    if math.isnan(t0):
        return rec
    after = t >= t0
    t_diam = first_crossing(t[after], col["min_dist"][after], DIAMETER)
    if not math.isnan(t_diam):
        rec.t_star = t_diam - t0
        rec.v_star = interpolate(t, col["vs_mean_y"], t_diam)
        rec.v_star_avg = (interpolate(t, col["centroid_y"], t_diam) - H0) / rec.t_star
        rec.f_star = interpolate(t, col["force_y"], t_diam)

    touching = col["min_dist"] <= epsilon
    if "contact_points" in col:
        touching |= col["contact_points"] > 0
    hits = np.flatnonzero(touching & after)
    if len(hits) == 0:
        return rec
    ic = hits[0]
    rec.t_cont = float(t[ic]) - t0
    d = col["min_dist"][ic:]
    i_min = int(np.argmin(d))
    rest = d[i_min:]
    i_max = int(np.argmax(rest))
    if rest[i_max] - d[i_min] > REBOUND_THRESHOLD * epsilon:
        rec.h_jump = float(rest[i_max])
        rec.t_jump = float(t[ic + i_min + i_max]) - t0
    return rec


# -- output -----------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def write_outputs(samples: list[dict], qoi: QoIRecord | None, directory) -> dict:
    """Write ``dist.csv`` (time, min distance; no header), ``samples.csv`` and ``qoi.csv``."""
    os.makedirs(directory, exist_ok=True)
    paths = {name: os.path.join(directory, name) for name in ("dist.csv", "samples.csv", "qoi.csv")}
    try:
        with open(paths["dist.csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            for s in samples:
                w.writerow([_fmt(s["t"]), _fmt(s["min_dist"])])
        with open(paths["samples.csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            cols = [c for c in SAMPLE_COLUMNS if not samples or c in samples[0]]
            w.writerow(cols)
            for s in samples:
                w.writerow([_fmt(s[c]) for c in cols])
        if qoi is not None:
            with open(paths["qoi.csv"], "w", newline="") as fh:
                w = csv.writer(fh)
                names = [f.name for f in fields(qoi)]
                w.writerow(names)
                w.writerow([_fmt(getattr(qoi, n)) for n in names])
    except OSError as exc:
        raise OSError(f"cannot write outputs to {directory}: {exc}") from exc
    return paths


def read_dist(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return data.reshape(-1, 2)
