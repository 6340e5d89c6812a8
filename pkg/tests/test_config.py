import pytest

from hbo2d.config import load_config, validate_config
from hbo2d.errors import ConfigError


def test_defaults():
    cfg = validate_config("")
    assert (cfg.grid.N, cfg.grid.alpha) == (256, 10.0)
    assert (cfg.model.s, cfg.model.m) == (0.5, 2)
    assert cfg.groundstate.tol == 1e-8
    assert cfg.integrator.blowup_linf_threshold == 1e5
    assert cfg.scenario is None


def test_full_sections_parse():
    text = """
    # comment
    [model]
    s = 0.75
    m = 3
    [grid]
    N = 64        # trailing comment
    alpha = 4
    [integrator]
    scheme = irk4
    dt = auto
    t_max = 2.5
    dealias = yes
    [scenario]
    family = two_soliton
    component1 = 0.9, 1, 5, 0
    component2 = 1.0, 0.25, 1, 0
    [output]
    save_times = 1, 2.5
    """
    cfg = validate_config(text)
    assert cfg.model.m == 3 and cfg.grid.N == 64
    assert cfg.integrator.scheme == "irk4" and cfg.integrator.dt is None and cfg.integrator.dealias
    assert cfg.scenario.components[1].c == 0.25
    assert cfg.output.save_times == (1.0, 2.5)


def test_s_out_of_range():
    with pytest.raises(ConfigError) as exc:
        validate_config("[model]\ns = 1.5\n")
    assert any("s must lie in (0,1)" in e for e in exc.value.errors)
    assert "line 2" in exc.value.errors[0]


def test_odd_N():
    with pytest.raises(ConfigError) as exc:
        validate_config("[grid]\nN = 255\n")
    assert "N must be even" in exc.value.errors[0]


def test_all_errors_reported_together():
    text = "[model]\ns = 2\nfoo = 1\n[nope]\nx = 1\n[grid]\nN = abc\nN = 4\n[scenario]\nfamily = sech\n"
    with pytest.raises(ConfigError) as exc:
        validate_config(text)
    errs = exc.value.errors
    joined = "\n".join(errs)
    for needle in ("unknown key 'foo'", "unknown section [nope]", "bad value for grid.N",
                   "duplicate key 'N'", "s must lie", "unknown family"):
        assert needle in joined
    assert len(errs) >= 6


def test_malformed_lines():
    with pytest.raises(ConfigError) as exc:
        validate_config("s = 0.5\n[model\n[model]\njust words\n")
    assert len(exc.value.errors) == 3


def test_overrides_and_output_env(monkeypatch, tmp_path):
    monkeypatch.setenv("HBO2D_OUTPUT_DIR", str(tmp_path / "o"))
    cfg = validate_config("[grid]\nN = 64\n", {("grid", "N"): "32", ("model", "m"): "3"})
    assert cfg.grid.N == 32 and cfg.model.m == 3
    assert cfg.output.directory == str(tmp_path / "o")
    with pytest.raises(ConfigError):
        validate_config("", {("grid", "bogus"): "1"})


def test_two_soliton_needs_components():
    with pytest.raises(ConfigError):
        validate_config("[scenario]\nfamily = two_soliton\ncomponent1 = 1, 1, 0, 0\n")
    with pytest.raises(ConfigError):
        validate_config("[scenario]\nfamily = gaussian\ncomponent1 = 1, 1, 0, 0\n")


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.cfg"))
    with pytest.raises(ConfigError):
        validate_config(f"[groundstate]\nq_snapshot = {tmp_path / 'none.snap'}\n")


def test_checked_in_configs_validate():
    import glob
    import os
    root = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
    paths = sorted(glob.glob(os.path.join(root, "*.cfg")))
    assert paths
    for p in paths:
        load_config(p, {("groundstate", "q_snapshot"): "none"})
