"""Run configuration: ``key = value`` files with dot-namespaced keys."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

from .assembly import PhysicalParams, StabilizationParams
from .geometry import BALL_CENTER, BALL_RADIUS, LevelSet, circle_phi0, no_solid_phi0
from .mesh import MAX_LEVEL, build_graded_mesh, build_uniform_mesh
from .solver import NewtonConfig
from .timeloop import Setup

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class MeshConfig:
    kind: str = "uniform"       # "uniform" or "graded"
    level: int = 0
    ratio: float = 1.12
    extension: str = "face"

    def validate(self):
        if self.kind not in ("uniform", "graded"):
            raise ConfigError("mesh.kind must be 'uniform' or 'graded'")
        if self.kind == "uniform" and not 0 <= self.level <= MAX_LEVEL:
            raise ConfigError(f"mesh.level must lie in 0..{MAX_LEVEL}")
        if not self.ratio > 1:
            raise ConfigError("mesh.ratio must exceed 1")
        if self.extension not in ("face", "vertex"):
            raise ConfigError("mesh.extension must be 'face' or 'vertex'")


@dataclass
class TimeConfig:
    k0: float = 1.0e-4
    t_end: float = 0.6
    alpha_k: float = 0.1
    max_steps: int = 0           # 0: unlimited
    max_wall_time: float = 0.0   # seconds, 0: unlimited

    def validate(self):
        if not self.k0 > 0:
            raise ConfigError("time.k0 must be positive")
        if self.t_end < 0:
            raise ConfigError("time.t_end must be non-negative")


@dataclass
class ScenarioConfig:
    solid: bool = True
    center_x: float = BALL_CENTER[0]
    center_y: float = BALL_CENTER[1]
    radius: float = BALL_RADIUS
    normal_mode: str = "levelset"

    def validate(self):
        if not self.radius > 0:
            raise ConfigError("scenario.radius must be positive")
        if self.normal_mode not in ("levelset", "segment"):
            raise ConfigError("scenario.normal_mode must be 'levelset' or 'segment'")


@dataclass
class OutputConfig:
    dir: str = "output"
    stride: int = 1              # keep every n-th grid sample in dist.csv

    def validate(self):
        if self.stride < 1:
            raise ConfigError("output.stride must be >= 1")


@dataclass
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    physics: PhysicalParams = field(default_factory=PhysicalParams)
    stab: StabilizationParams = field(default_factory=StabilizationParams)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def items(self):
        """All ``(key, value)`` pairs, in a form ``parse_config`` accepts back."""
        for section in SECTIONS:
            obj = getattr(self, section)
            for f in dataclasses.fields(obj):
                v = getattr(obj, f.name)
                if section == "physics" and f.name == "gravity":
                    yield "physics.gravity_x", v[0]
                    yield "physics.gravity_y", v[1]
                else:
                    yield f"{section}.{f.name}", v

    def echo(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in self.items())

    def build_mesh(self):
        if self.mesh.kind == "graded":
            return build_graded_mesh(self.mesh.ratio)
        return build_uniform_mesh(self.mesh.level)

    def build_setup(self) -> Setup:
        mesh = self.build_mesh()
        sc = self.scenario
        phi, grad = circle_phi0((sc.center_x, sc.center_y), sc.radius) if sc.solid else no_solid_phi0()
        t = self.time
        return Setup(mesh, LevelSet(phi, grad, mesh), self.physics, self.stab, self.newton,
                     k0=t.k0, t_end=t.t_end, alpha_k=t.alpha_k, extension=self.mesh.extension,
                     normal_mode=sc.normal_mode, max_steps=t.max_steps or None,
                     max_wall_time=t.max_wall_time or None)


SECTIONS = ("mesh", "physics", "stab", "newton", "time", "scenario", "output")

PRESETS = {
    "paper-level0": {"mesh.kind": "uniform", "mesh.level": "0", "time.t_end": "0.6"},
    "paper-level1": {"mesh.kind": "uniform", "mesh.level": "1", "time.t_end": "0.6"},
    "paper-level2": {"mesh.kind": "uniform", "mesh.level": "2", "time.t_end": "0.6"},
    "paper-level3": {"mesh.kind": "uniform", "mesh.level": "3", "time.t_end": "0.6"},
    "paper-graded": {"mesh.kind": "graded", "time.t_end": "0.6"},
}


def _convert(raw: str, current):
    text = raw.strip()
    if isinstance(current, bool):
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    return text


def _section_fields(cfg: RunConfig, section: str) -> dict:
    obj = getattr(cfg, section)
    out = {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
    if section == "physics":
        g = out.pop("gravity")
        out["gravity_x"], out["gravity_y"] = float(g[0]), float(g[1])
    return out


def apply_settings(cfg: RunConfig, settings: list[tuple[str, str, int | None]]) -> RunConfig:
    """Apply ``(key, raw value, line)`` triples; later entries win."""
    values = {s: _section_fields(cfg, s) for s in SECTIONS}
    for key, raw, line in settings:
        where = f"line {line}: " if line is not None else ""
        section, _, name = key.partition(".")
        if section not in values or name not in values[section]:
            raise ConfigError(f"{where}unknown key {key!r}")
        try:
            values[section][name] = _convert(raw, values[section][name])
        except ValueError as exc:
            raise ConfigError(f"{where}bad value for {key}: {exc}") from exc
    phys = values["physics"]
    gravity = (phys.pop("gravity_x"), phys.pop("gravity_y"))
    try:
        out = RunConfig(
            mesh=MeshConfig(**values["mesh"]),
            physics=PhysicalParams(gravity=gravity, **phys),
            stab=StabilizationParams(**values["stab"]),
            newton=NewtonConfig(**values["newton"]),
            time=TimeConfig(**values["time"]),
            scenario=ScenarioConfig(**values["scenario"]),
            output=OutputConfig(**values["output"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for section in ("mesh", "time", "scenario", "output"):
        getattr(out, section).validate()
    return out


def parse_lines(text: str) -> list[tuple[str, str, int]]:
    settings = []
    for n, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {n}: expected 'key = value'")
        settings.append((key.strip(), value.strip(), n))
    return settings


def parse_config(text: str = "", overrides=(), preset: str | None = None) -> RunConfig:
    """Defaults, then the preset, then ``text``, then ``overrides`` (``key=value`` strings)."""
    settings = []
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        settings += [(k, v, None) for k, v in PRESETS[preset].items()]
    settings += parse_lines(text)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        settings.append((key.strip(), value.strip(), None))
    cfg = apply_settings(RunConfig(), settings)
    log.info("configuration:\n%s", cfg.echo())
    return cfg


def load_config(path: str | None = None, overrides=(), preset: str | None = None) -> RunConfig:
    text = ""
    if path is not None:
        with open(path) as fh:
            text = fh.read()
    return parse_config(text, overrides, preset)
