import pytest

from cutfsi.config import PRESETS, ConfigError, RunConfig, load_config, parse_config


def test_defaults_are_the_benchmark():
    cfg = parse_config()
    assert cfg.physics.rho_f == 1141.0 and cfg.physics.nu_f == 7.0114e-5
    assert cfg.physics.gravity == (0.0, -9.81)
    assert cfg.stab.gamma_N == 1e7 and cfg.stab.w_max == 2.0 and cfg.stab.epsilon == 1e-4
    assert cfg.newton.tol == 1e-7
    assert cfg.time.k0 == 1e-4 and cfg.time.t_end == 0.6 and cfg.time.alpha_k == 0.1
    assert cfg.mesh.kind == "uniform" and cfg.mesh.level == 0


def test_parse_file_text_with_comments_and_overrides():
    text = """
    # comment line
    mesh.level = 1      # trailing comment
    physics.gravity_y = -1.0
    stab.gamma_C_mode = fixed
    scenario.solid = false
    """
    cfg = parse_config(text, overrides=["mesh.level=2", "time.t_end=0.1"])
    assert cfg.mesh.level == 2
    assert cfg.physics.gravity == (0.0, -1.0)
    assert cfg.stab.gamma_C_mode == "fixed"
    assert cfg.scenario.solid is False
    assert cfg.time.t_end == 0.1


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("mesh.level = 0\nmesh.levle = 1\n")


def test_bad_value_reports_line():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("mesh.level = many")


def test_missing_equals():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("mesh.level 0")


@pytest.mark.parametrize("override", [
    "stab.w_max=0.5", "mesh.level=9", "mesh.kind=hex", "time.k0=0", "physics.rho_f=-1",
    "scenario.normal_mode=other", "output.stride=0", "newton.tol=0",
])
def test_invalid_values_rejected(override):
    with pytest.raises(ConfigError):
        parse_config(overrides=[override])


def test_echo_roundtrip():
    cfg = parse_config(overrides=["mesh.level=1", "stab.gamma_N=123.5", "physics.gravity_x=0.25"])
    again = parse_config(cfg.echo())
    assert again == cfg


def test_presets():
    assert set(PRESETS) >= {"paper-level0", "paper-level1", "paper-graded"}
    assert parse_config(preset="paper-level1").mesh.level == 1
    assert parse_config(preset="paper-graded").mesh.kind == "graded"
    # explicit settings win over the preset
    assert parse_config("mesh.level = 0", preset="paper-level1").mesh.level == 0
    with pytest.raises(ConfigError):
        parse_config(preset="nope")


def test_load_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("time.t_end = 0.01\noutput.dir = out\n")
    cfg = load_config(str(p))
    assert cfg.time.t_end == 0.01 and cfg.output.dir == "out"


def test_build_setup_variants():
    setup = parse_config(overrides=["scenario.solid=false", "time.max_steps=7"]).build_setup()
    assert setup.max_steps == 7
    assert setup.levelset.phi0([[0.0, 0.05]]) > 0
    assert isinstance(RunConfig().build_setup().mesh.nx, int)
