import numpy as np
import pytest
import yaml

import _bench
from contourref.config import apply_overrides, config_from_dict, load_config
from contourref.errors import InvalidInputError

GAINS = {"kp_x_per_s2": 1e6, "kp_y_per_s2": 1e6, "kd_x_per_s": 2000.0, "kd_y_per_s": 2000.0}


def test_bundled_configs_load():
    cfg = load_config(_bench.CONFIGS / "smooth_spiral.yaml")
    assert cfg.name == "smooth_spiral"
    assert cfg.bounds.tol == 2e-5 and cfg.bounds.relax_count == 16
    np.testing.assert_array_equal(np.diag(cfg.weights.q_omega), [1e7, 1.0])
    assert cfg.weights.time == 1000.0
    assert cfg.gains.resolve()[0] == _bench.TRUE_GAINS
    sharp = load_config(_bench.CONFIGS / "sharp_spiral.yaml")
    assert sharp.contour.shape == "sharp_spiral" and sharp.contour.r0_m == 1e-3


def test_exponent_floats_without_sign_parse_as_numbers(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("gains: {kp_x_per_s2: 1e6, kp_y_per_s2: 1.0e6, kd_x_per_s: 2e3, kd_y_per_s: 2000}\n")
    assert load_config(f).gains.gains.kp_x == 1e6


def test_unknown_key_names_allowed_keys():
    with pytest.raises(InvalidInputError, match="unknown key bounds.tol.*tol_m"):
        config_from_dict({"bounds": {"tol": 2e-5}, "gains": GAINS})
    with pytest.raises(InvalidInputError, match="top-level"):
        config_from_dict({"bound": {}, "gains": GAINS})


@pytest.mark.parametrize("tol", [0.0, -1e-6])
def test_non_positive_tolerance_rejected(tol):
    with pytest.raises(InvalidInputError, match="bounds.tol_m must be > 0"):
        config_from_dict({"bounds": {"tol_m": tol}, "gains": GAINS})


def test_wrong_type_rejected():
    with pytest.raises(InvalidInputError, match="relax_count must be of type int"):
        config_from_dict({"bounds": {"relax_count": 1.5}, "gains": GAINS})
    with pytest.raises(InvalidInputError, match="tol_m must be of type float"):
        config_from_dict({"bounds": {"tol_m": "small"}, "gains": GAINS})


def test_exactly_one_gain_source(tmp_path):
    with pytest.raises(InvalidInputError, match="gain"):
        config_from_dict({})
    g = tmp_path / "g.txt"
    g.write_text("kp_x = 1\nkp_y = 1\nkd_x = 1\nkd_y = 1\n")
    with pytest.raises(InvalidInputError, match="gain"):
        config_from_dict({"gains": {**GAINS, "gains_file": str(g)}})


def test_missing_input_file_reported(tmp_path):
    with pytest.raises(InvalidInputError, match="file not found"):
        config_from_dict({"gains": {"gains_file": "nope.txt"}}, tmp_path)
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.yaml")


def test_malformed_yaml_names_line(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("name: x\nbounds: [\n")
    with pytest.raises(InvalidInputError, match="line"):
        load_config(f)


def test_overrides_apply_and_change_hash():
    base = load_config(_bench.CONFIGS / "smooth_spiral.yaml")
    over = load_config(_bench.CONFIGS / "smooth_spiral.yaml", ["bounds.tol_m=1e-5", "contour.n_points=128"])
    assert over.bounds.tol == 1e-5 and over.contour.n_points == 128
    assert over.hash() != base.hash()
    assert load_config(_bench.CONFIGS / "smooth_spiral.yaml").hash() == base.hash()
    with pytest.raises(InvalidInputError, match="section.key=value"):
        apply_overrides({}, ["bounds.tol_m"])


def test_gains_file_path_is_relative_to_config(tmp_path):
    (tmp_path / "g.txt").write_text("kp_x = 5\nkp_y = 6\nkd_x = 7\nkd_y = 8\n")
    (tmp_path / "c.yaml").write_text(yaml.safe_dump({"gains": {"gains_file": "g.txt"}}))
    cfg = load_config(tmp_path / "c.yaml")
    assert cfg.gains.resolve()[0].kd_y == 8
    # editing an input file changes the run hash
    h = cfg.hash()
    (tmp_path / "g.txt").write_text("kp_x = 5\nkp_y = 6\nkd_x = 7\nkd_y = 9\n")
    assert cfg.hash() != h
