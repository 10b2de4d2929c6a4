import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contourref.errors import IdentifiabilityError, InvalidInputError
from contourref.plant import ControllerGains
from contourref.sysid import (
    LOG_HEADER,
    TrackingLog,
    fit_gains,
    read_gains,
    sinusoid_reference,
    synth_log,
)

START = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
SLOW = ControllerGains(100.0, 100.0, 10.0, 10.0)
FROZEN_GAINS = [[100.44618311294302, 100.52655920034965], [10.103027273571008, 10.053407888670709]]
FROZEN_SE = [[0.7131007373425062, 0.642886901177425], [0.10125010579699185, 0.05730344410763666]]


def _ref():
    return sinusoid_reference(duration=2.0, dt=1e-3)


def test_noiseless_recovery():
    rep = fit_gains(synth_log(_ref(), SLOW, START))
    np.testing.assert_allclose(rep.gains.matrix, SLOW.matrix, rtol=1e-9)
    assert np.all(rep.residual_rms < 1e-10)
    np.testing.assert_allclose(rep.r_squared, 1.0, atol=1e-12)
    assert rep.n_samples == 2000


@settings(max_examples=25)
@given(st.floats(20, 500), st.floats(20, 500), st.floats(2, 20), st.floats(2, 20))
def test_noiseless_recovery_any_stable_gains(kpx, kpy, kdx, kdy):
    g = ControllerGains(kpx, kpy, kdx, kdy)
    rep = fit_gains(synth_log(_ref(), g, START))
    np.testing.assert_allclose(rep.gains.matrix, g.matrix, rtol=1e-7)


@pytest.mark.filterwarnings("ignore:non-positive PD gain")
def test_axes_fit_independently():
    g = ControllerGains(100.0, 300.0, 10.0, 4.0)
    log = synth_log(_ref(), g, START, noise_std=0.01, seed=3)
    rep = fit_gains(log)
    scrambled = TrackingLog(log.t, log.ref_pos.copy(), log.ref_vel.copy(), log.out_pos.copy(), log.out_vel.copy(), log.accel.copy())
    rng = np.random.default_rng(9)
    for a in (scrambled.ref_pos, scrambled.ref_vel, scrambled.out_pos, scrambled.out_vel, scrambled.accel):
        a[:, 1] = rng.normal(size=len(a))
    rep2 = fit_gains(scrambled)
    assert rep2.gains.kp_x == rep.gains.kp_x and rep2.gains.kd_x == rep.gains.kd_x


def test_noisy_fit_is_least_squares_optimum():
    log = synth_log(_ref(), SLOW, START, noise_std=0.01, seed=1)
    rep = fit_gains(log)
    e, ev = log.errors()

    def rss(kp, kd, j=0):
        r = log.accel[1:, j] - kp * e[:-1, j] - kd * ev[:-1, j]
        return r @ r

    best = rss(rep.gains.kp_x, rep.gains.kd_x)
    for dkp, dkd in [(1e-3, 0), (-1e-3, 0), (0, 1e-4), (0, -1e-4)]:
        assert rss(rep.gains.kp_x + dkp, rep.gains.kd_x + dkd) >= best


def test_noisy_fit_frozen_values():
    rep = fit_gains(synth_log(_ref(), SLOW, START, noise_std=0.01, seed=0))
    # frozen from the seeded generator
    np.testing.assert_allclose(rep.gains.matrix, FROZEN_GAINS, rtol=1e-9)
    np.testing.assert_allclose(rep.std_errors, FROZEN_SE, rtol=1e-6)


def test_monte_carlo_coverage():
    inside = 0
    for seed in range(40):
        rep = fit_gains(synth_log(_ref(), SLOW, START, noise_std=0.01, seed=seed))
        inside += bool(np.all(np.abs(rep.gains.matrix - SLOW.matrix) <= 3 * rep.std_errors))
    assert inside >= 38


def test_zero_log_is_unidentifiable():
    m = 50
    z = np.zeros((m, 2))
    with pytest.raises(IdentifiabilityError):
        fit_gains(TrackingLog(np.arange(m) * 1e-3, z, z, z, z, z))


def test_collinear_errors_are_unidentifiable():
    m = 50
    e = np.column_stack([np.linspace(1, 2, m)] * 2)
    z = np.zeros((m, 2))
    # velocity error exactly proportional to position error
    with pytest.raises(IdentifiabilityError, match="rank"):
        fit_gains(TrackingLog(np.arange(m) * 1e-3, e, 3 * e, z, z, e))


def test_mismatched_shapes_rejected():
    z = np.zeros((10, 2))
    with pytest.raises(InvalidInputError, match="shape"):
        TrackingLog(np.arange(10.0), z, z, z, z, np.zeros((9, 2)))
    with pytest.raises(InvalidInputError, match="increasing"):
        TrackingLog(np.zeros(10), z, z, z, z, z)
    with pytest.raises(InvalidInputError, match="at least 3"):
        fit_gains(TrackingLog(np.arange(2.0), z[:2], z[:2], z[:2], z[:2], z[:2]))


def test_log_csv_round_trip_is_exact(tmp_path):
    log = synth_log(sinusoid_reference(duration=0.05, dt=1e-3), SLOW, START, noise_std=0.01, seed=2)
    f = tmp_path / "log.csv"
    log.write_csv(f)
    back = TrackingLog.read_csv(f)
    for name in ("t", "ref_pos", "ref_vel", "out_pos", "out_vel", "accel"):
        np.testing.assert_array_equal(getattr(back, name), getattr(log, name))


@pytest.mark.parametrize(
    "body, match",
    [
        ("", "line 1: empty"),
        ("t,x\n", "line 1: expected header"),
        (",".join(LOG_HEADER) + "\n" + ",".join(["0"] * 11) + "\n" + ",".join(["1"] * 10) + "\n", "line 3: expected 11"),
        (",".join(LOG_HEADER) + "\n" + ",".join(["0"] * 10 + ["x"]) + "\n", "line 2: non-numeric"),
        (",".join(LOG_HEADER) + "\n" + ",".join(["0"] * 10 + ["nan"]) + "\n", "line 2: non-finite"),
        (",".join(LOG_HEADER) + "\n", "no data rows"),
    ],
)
def test_log_read_errors(tmp_path, body, match):
    f = tmp_path / "bad.csv"
    f.write_text(body)
    with pytest.raises(InvalidInputError, match=match):
        TrackingLog.read_csv(f)


def test_report_files_round_trip(tmp_path):
    rep = fit_gains(synth_log(_ref(), SLOW, START, noise_std=0.01, seed=4))
    rep.write(tmp_path / "fit.txt", tmp_path / "gains.txt")
    assert read_gains(tmp_path / "gains.txt") == rep.gains
    assert "Kp" in (tmp_path / "fit.txt").read_text()
    (tmp_path / "g2.txt").write_text("kp_x = 1\nkp_y = 2\nkd_x = 3\n")
    with pytest.raises(InvalidInputError, match="kd_y"):
        read_gains(tmp_path / "g2.txt")
