import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from contourref.contour import (
    RawPath,
    make_sharp_spiral,
    make_smooth_spiral,
    read_objective_csv,
    read_path_csv,
    resample_constant_arclength,
    sharp_spiral_corners,
    tangent_orientations,
    wrap_angle,
    write_objective_csv,
    write_path_csv,
)
from contourref.errors import InvalidInputError


def test_straight_segment_subdivides_uniformly():
    obj = resample_constant_arclength(RawPath([[0, 0], [1, 0]]), 5)
    np.testing.assert_allclose(obj.xy[:, 0], [0, 0.25, 0.5, 0.75, 1.0], atol=1e-15)
    assert np.all(obj.xy[:, 1] == 0)
    assert obj.delta_s == pytest.approx(0.25, rel=1e-12)


def test_dense_circle_samples_lie_on_circle():
    th = np.linspace(0, 2 * np.pi, 20001)[:-1]
    path = RawPath(np.column_stack([np.cos(th), np.sin(th)]), closed=True)
    obj = resample_constant_arclength(path, 8)
    assert len(obj) == 8
    assert np.abs(np.hypot(*obj.xy.T) - 1).max() <= 1e-6
    steps = np.hypot(*np.diff(np.vstack([obj.xy, obj.xy[:1]]), axis=0).T)
    np.testing.assert_allclose(steps, obj.delta_s, rtol=1e-9)
    # divider steps are chords of the circle, 2 sin(pi/8)
    assert obj.delta_s == pytest.approx(2 * np.sin(np.pi / 8), rel=1e-6)


def test_benchmark_spiral_has_requested_count():
    obj = resample_constant_arclength(make_smooth_spiral(0.01, 1, 0.002), 256)
    assert len(obj) == 256 and obj.alpha.shape == (256,)


def test_folded_path_is_rejected_not_snapped():
    with pytest.raises(InvalidInputError, match="folds back"):
        resample_constant_arclength(RawPath([[0, 0], [0, 1], [0, 0.5]]), 3)
    # a valid placement exists here, but the first-crossing walk cannot find it
    with pytest.raises(InvalidInputError):
        resample_constant_arclength(RawPath([[0, -0.5], [1, 0], [0, 1]]), 3)


def test_zero_length_path_rejected():
    with pytest.raises(InvalidInputError):
        RawPath([[0, 0], [0, 0]])
    with pytest.raises(InvalidInputError):
        RawPath([[1.0, 2.0]])


@pytest.mark.parametrize(
    "pts, expected",
    [
        (np.column_stack([np.linspace(0, 1, 6), np.zeros(6)]), 0.0),
        (np.column_stack([np.zeros(6), np.linspace(0, 1, 6)]), np.pi / 2),
    ],
)
def test_axis_aligned_tangents(pts, expected):
    np.testing.assert_allclose(tangent_orientations(pts), expected, atol=1e-15)


def test_circle_tangent_is_perpendicular_to_radius():
    n = 400
    th = 2 * np.pi * np.arange(n) / n
    pts = np.column_stack([np.cos(th), np.sin(th)])
    alpha = tangent_orientations(pts, closed=True)
    err = np.abs(wrap_angle(alpha - (th + np.pi / 2))).max()
    assert err <= (2 * np.pi / n) ** 2


def test_smooth_spiral_endpoints():
    p = make_smooth_spiral(0.01, 1, 0.002)
    r = np.hypot(*p.vertices.T)
    assert r[0] == pytest.approx(0.010, rel=1e-12)
    assert r[-1] == pytest.approx(0.012, rel=1e-12)


def test_half_turn_ends_at_angle_pi_from_start():
    p = make_smooth_spiral(0.01, 0.5, 0.002, start_angle=0.0)
    end = p.vertices[-1]
    assert np.arctan2(end[1], end[0]) == pytest.approx(np.pi, abs=1e-12)


def test_spiral_length_matches_quadrature():
    r0, pitch = 0.01, 0.002
    p = make_smooth_spiral(r0, 1, pitch)
    b = pitch / (2 * np.pi)
    exact, _ = quad(lambda t: np.hypot(r0 + b * t, b), 0, 2 * np.pi)
    assert p.length == pytest.approx(exact, rel=1e-2)
    assert p.length == pytest.approx(0.0691440428054921, rel=1e-12)


def test_sharp_spiral_four_steps():
    p = make_sharp_spiral(1e-3, 4)
    d = np.diff(p.vertices, axis=0)
    assert len(d) == 4
    assert np.all((d[:, 0] == 0) ^ (d[:, 1] == 0))
    assert np.all(np.einsum("ij,ij->i", d[:-1], d[1:]) == 0)
    assert len(sharp_spiral_corners(p)) == 3


def test_sharp_benchmark_length():
    p = make_sharp_spiral(1e-3, 8)
    # segments 2 r0 + i r0/2, i = 0..7
    assert p.length == pytest.approx(0.030, rel=1e-12)
    obj = resample_constant_arclength(p, 256)
    assert obj.delta_s == pytest.approx(1.1679163747479538e-4, rel=1e-12)


@st.composite
def walkable_paths(draw):
    """Polylines with turns of at most 90 degrees and a spacing below half the shortest segment.

    Coarser sampling can defeat the first-crossing chord walk, which then raises.
    """
    m = draw(st.integers(1, 8))
    lengths = np.array(draw(st.lists(st.floats(0.2, 1.0), min_size=m, max_size=m)))
    turns = draw(st.lists(st.floats(-np.pi / 2, np.pi / 2), min_size=m - 1, max_size=m - 1))
    heading = draw(st.floats(-np.pi, np.pi)) + np.concatenate([[0.0], np.cumsum(turns)])
    steps = lengths[:, None] * np.column_stack([np.cos(heading), np.sin(heading)])
    verts = np.vstack([[0.0, 0.0], np.cumsum(steps, axis=0)])
    n_min = int(np.ceil(2 * lengths.sum() / lengths.min())) + 1
    n = draw(st.integers(max(n_min, 3), max(n_min, 3) + 200))
    return RawPath(verts), n


@given(walkable_paths())
def test_resampling_properties(case):
    path, n = case
    v = path.vertices
    obj = resample_constant_arclength(path, n)
    assert len(obj) == n
    np.testing.assert_allclose(obj.xy[0], v[0], atol=1e-12)
    np.testing.assert_allclose(obj.xy[-1], v[-1], atol=1e-12)
    steps = np.hypot(*np.diff(obj.xy, axis=0).T)
    np.testing.assert_allclose(steps, obj.delta_s, rtol=1e-7)
    # chords never exceed the arc they span
    assert obj.delta_s * (n - 1) <= path.length * (1 + 1e-12)


@given(st.integers(3, 30), st.floats(0, 2 * np.pi))
def test_reversed_line_flips_orientation(n, ang):
    d = np.array([np.cos(ang), np.sin(ang)])
    pts = np.outer(np.linspace(0, 1, n), d)
    fwd = tangent_orientations(pts)
    bwd = tangent_orientations(pts[::-1])
    assert np.abs(wrap_angle(bwd - fwd - np.pi)).max() <= 1e-12


@given(st.floats(-50, 50))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -np.pi < w <= np.pi
    assert np.cos(w) == pytest.approx(np.cos(a), abs=1e-9)


def test_objective_csv_round_trip(tmp_path):
    obj = resample_constant_arclength(make_sharp_spiral(1e-3, 4), 32)
    f = tmp_path / "obj.csv"
    write_objective_csv(obj, f)
    back = read_objective_csv(f)
    np.testing.assert_allclose(back.xy, obj.xy, rtol=1e-14, atol=1e-18)
    np.testing.assert_allclose(back.alpha, obj.alpha, rtol=1e-14)


def test_path_csv_errors_name_the_line(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("x,y\n0,0\n1,oops\n")
    with pytest.raises(InvalidInputError, match="line 3"):
        read_path_csv(f)
    f.write_text("a,b\n0,0\n")
    with pytest.raises(InvalidInputError, match="line 1"):
        read_path_csv(f)
    f.write_text("")
    with pytest.raises(InvalidInputError, match="empty"):
        read_path_csv(f)


def test_path_csv_round_trip_is_exact(tmp_path):
    p = make_smooth_spiral(0.01, 1, 0.002)
    write_path_csv(p, tmp_path / "c.csv")
    np.testing.assert_array_equal(read_path_csv(tmp_path / "c.csv").vertices, p.vertices)
