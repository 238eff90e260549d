import numpy as np
import pytest

from riccati_cascade.config import ConfigError, ScenarioConfig, load_config, parse_config, render_config
from riccati_cascade.sensors import default_landmark_grid, save_landmarks


def test_empty_text_is_the_reference_scenario():
    assert parse_config("") == ScenarioConfig()
    assert load_config(None) == ScenarioConfig()


def test_render_round_trip():
    cfg = ScenarioConfig(k_R=12.5, dt=2e-3, weights=(0.1, 0.2, 0.3, 0.4), attitude_axis=None, fov_half_angle=0.25, tune_weights=False)
    assert parse_config(render_config(cfg)) == cfg
    assert parse_config(render_config(ScenarioConfig())) == ScenarioConfig()


def test_keys_are_case_insensitive_and_accept_comments():
    cfg = parse_config("[observer]\nk_R = 7  ; gain\n[initial]\nattitude_axis = 0, 0, 1\n")
    assert cfg.k_R == 7.0
    assert cfg.attitude_axis == (0.0, 0.0, 1.0)


@pytest.mark.parametrize(
    "text, where",
    [
        ("[observer]\nk_R = 1\nbogus = 3\n", ":3: [observer] bogus"),
        ("\n[integration]\ndt = -1\n", ":3: [integration] dt"),
        ("[camera]\noffset = 1 2\n", ":2: [camera] offset"),
        ("[integration]\nstride = 1.5\n", ":2: [integration] stride"),
        ("[trajectory]\nkind = spiral\n", ":2: [trajectory] kind"),
        ("[observer]\nk_R = nan\n", ":2: [observer] k_r"),
        ("no section header\n", "cfg.ini"),
    ],
)
def test_errors_name_the_line(text, where):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "cfg.ini")
    assert where in str(info.value)


def test_validation_on_construction():
    with pytest.raises(ConfigError, match="positive"):
        ScenarioConfig(k_R=0.0)
    with pytest.raises(ConfigError):
        ScenarioConfig(known_count=2)
    with pytest.raises(ConfigError):
        ScenarioConfig().with_value("dt", 0.0)
    assert ScenarioConfig().with_value("q", 0.5).q == 0.5


def test_relative_landmark_file(tmp_path):
    save_landmarks(tmp_path / "grid.txt", default_landmark_grid())
    (tmp_path / "run.ini").write_text("[landmarks]\nfile = grid.txt\n")
    cfg = load_config(tmp_path / "run.ini")
    np.testing.assert_array_equal(cfg.landmarks().positions, default_landmark_grid().positions)


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")
    with pytest.raises(ConfigError, match="landmarks.file"):
        ScenarioConfig(landmark_file=str(tmp_path / "absent.txt")).landmarks()


def test_derived_objects():
    cfg = ScenarioConfig()
    assert np.allclose(cfg.rig().p_c, [0.02, 0.06, 0.01])
    R0 = cfg.initial_attitude()
    assert abs(np.trace(R0) - (1 + 2 * np.cos(0.9 * np.pi))) < 1e-12
    assert cfg.initial_xhat(16).shape == (54,)
    with pytest.raises(ConfigError):
        ScenarioConfig(xhat0=(1.0, 2.0)).initial_xhat(16)
    a = ScenarioConfig(attitude_axis=None, seed=5)
    np.testing.assert_array_equal(a.initial_attitude(), a.initial_attitude())
    with pytest.raises(ConfigError):
        ScenarioConfig(trajectory="line", line_landmark=99).trajectory_spec()
