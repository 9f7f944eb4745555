import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmelab.errors import ConfigError
from pmelab.shapegen import (
    ShapeSample,
    default_config,
    denormalize,
    generate_geometry,
    geometry,
    loft,
    naca_section,
    naca_thickness,
    normalize,
    polygon_self_intersects,
    sample_design,
    transform_section,
    validity_check,
)


def test_thickness_endpoints_and_reference_value():
    assert naca_thickness(0.0, 0.12) == 0.0
    assert abs(naca_thickness(1.0, 0.12)) < 1e-12
    # 5 t (0.2969 sqrt(x) - 0.1260 x - 0.3516 x^2 + 0.2843 x^3 - 0.1036 x^4) at x=0.3
    x = 0.3
    ref = 5 * 0.12 * (0.2969 * x**0.5 - 0.1260 * x - 0.3516 * x**2 + 0.2843 * x**3 - 0.1036 * x**4)
    np.testing.assert_allclose(naca_thickness(x, 0.12), ref, rtol=1e-14)
    np.testing.assert_allclose(naca_thickness(x, 0.12), 0.06000, atol=1e-5)


def test_symmetric_section_mirrors():
    s = naca_section(0.0, 0.4, 0.12, 16)
    assert s.shape == (16, 2)
    half = 8
    upper = s[1:half][::-1]  # LE side first
    lower = s[half + 1 :]
    np.testing.assert_allclose(upper[:, 0], lower[:, 0])
    np.testing.assert_allclose(upper[:, 1], -lower[:, 1])
    np.testing.assert_array_equal(s[0], [1.0, s[0, 1]])
    assert abs(s[0, 1]) < 1e-12
    np.testing.assert_array_equal(s[half], [0.0, 0.0])


def test_cambered_section_is_simple_polygon():
    assert not polygon_self_intersects(naca_section(0.09, 0.2, 0.06, 28))


@pytest.mark.parametrize("bad", [dict(m=np.nan), dict(p=0.0), dict(t=-0.1), dict(n_pts=7)])
def test_section_rejects_bad_input(bad):
    args = dict(m=0.02, p=0.4, t=0.12, n_pts=12)
    args.update(bad)
    with pytest.raises(ConfigError):
        naca_section(**args)


def test_transform_identity_and_half_turn():
    pts = np.array([[0.0, 0.0], [1.0, 0.05], [0.5, -0.03]])
    out = transform_section(pts)
    np.testing.assert_array_equal(out, np.column_stack([pts[:, 0], np.zeros(3), pts[:, 1]]))
    flipped = transform_section(pts, twist=np.pi)
    np.testing.assert_allclose(flipped[:, [0, 2]], -pts, atol=1e-15)


def test_twist_quarter_turn_convention():
    out = transform_section(np.array([[1.0, 0.0]]), twist=np.pi / 4)
    r = np.sqrt(2) / 2
    np.testing.assert_allclose(out[0], [r, 0.0, -r], atol=1e-15)


def test_transform_scale_rotate_translate_order():
    out = transform_section(np.array([[1.0, 0.0]]), chord=2.0, le=(1, 2, 3), yaw=np.pi / 2)
    np.testing.assert_allclose(out[0], [1.0, 4.0, 3.0], atol=1e-15)


def test_loft_constant_and_midpoint():
    a = np.random.default_rng(0).standard_normal((6, 3))
    np.testing.assert_array_equal(loft([a, a], 4), np.broadcast_to(a, (4, 6, 3)))
    b = a + 1.0
    mid = loft([a, b], 3)[1]
    np.testing.assert_allclose(mid, 0.5 * (a + b))


def test_loft_piecewise_linear_three_sections():
    rng = np.random.default_rng(1)
    s0, s1, s2 = rng.standard_normal((3, 4, 3))
    grid = loft([s0, s1, s2], 5, spans=[0.0, 0.5, 1.0])
    np.testing.assert_allclose(grid[1], 0.5 * (s0 + s1))
    np.testing.assert_array_equal(grid[2], s1)
    np.testing.assert_allclose(grid[3], 0.5 * (s1 + s2))


def test_loft_rejects_mismatched_sections():
    with pytest.raises(ConfigError):
        loft([np.zeros((4, 3)), np.zeros((6, 3))], 3)


def test_default_dimensions():
    cfg = default_config()
    assert (cfg.M, cfg.n_g) == (10, 2352)
    assert len(cfg.active_names) == 10


def test_baseline_gives_zero_modification(small_cfg):
    s = generate_geometry(small_cfg.u_base, small_cfg)
    assert s.valid
    np.testing.assert_array_equal(s.d, np.zeros(small_cfg.n_g))


def test_eq5_identity_and_determinism(small_cfg):
    g0 = geometry(small_cfg.u_base, small_cfg)
    for u in sample_design(small_cfg, 5):
        s = generate_geometry(u, small_cfg, g0)
        np.testing.assert_array_equal(s.d + g0, s.g)
        np.testing.assert_array_equal(generate_geometry(u, small_cfg, g0).g, s.g)


@pytest.mark.parametrize("name, changed, fixed", [
    ("s0.chord", [0, 1], [2, 3, 4]),
    ("s2.chord", [3, 4], [0, 1, 2]),
])
def test_chord_perturbation_is_local(name, changed, fixed):
    # base mid le_y sits at half span, so 5 stations are at 0, .25, .5, .75, 1
    cfg = default_config(pts_per_section=12, n_span=5)
    k = cfg.active_names.index(name)
    u = cfg.u_base.copy()
    g_a = geometry(u, cfg).reshape(5, 12, 3)
    u[k] = 0.9
    g_b = geometry(u, cfg).reshape(5, 12, 3)
    le = 6  # chord scales about the leading edge, which stays put
    for i in changed:
        moved = np.any(g_a[i] != g_b[i], axis=1)
        assert np.all(np.delete(moved, le)) and not moved[le]
    for i in fixed:
        np.testing.assert_array_equal(g_a[i], g_b[i])


def test_denormalize_examples():
    b = (np.array([2.0, 0.0]), np.array([4.0, 1.0]))
    np.testing.assert_array_equal(denormalize([0, 0], b), b[0])
    np.testing.assert_array_equal(denormalize([1, 1], b), b[1])
    assert denormalize([0.5, 0.5], b)[0] == 3.0
    with pytest.raises(ConfigError):
        denormalize([0.5], (np.array([1.0]), np.array([1.0])))


@given(st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_normalize_inverts_denormalize(u):
    b = (np.array([-1.0, 0.1, 3.0]), np.array([2.0, 0.9, 7.5]))
    np.testing.assert_allclose(normalize(denormalize(u, b), b), u, atol=1e-15)


def test_validity_flags(small_cfg):
    base = generate_geometry(small_cfg.u_base, small_cfg)
    assert validity_check(base, small_cfg)
    g = base.g.copy()
    g[7] = np.nan
    assert not validity_check(ShapeSample(g=g, d=g, u=base.u, valid=True), small_cfg)
    bow_tie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    assert polygon_self_intersects(bow_tie)
    assert not polygon_self_intersects(square)
    assert not validity_check(np.array([bow_tie]))


def brute_force_crossing(P):
    n = len(P)

    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            p1, p2, q1, q2 = P[i], P[(i + 1) % n], P[j], P[(j + 1) % n]
            if orient(q1, q2, p1) * orient(q1, q2, p2) < 0 and orient(p1, p2, q1) * orient(p1, p2, q2) < 0:
                return True
    return False


@settings(max_examples=60)
@given(st.integers(0, 10_000))
def test_crossing_test_matches_brute_force(seed):
    P = np.random.default_rng(seed).uniform(size=(6, 2))
    assert polygon_self_intersects(P) == brute_force_crossing(P)


def test_default_bounds_mostly_valid():
    cfg = default_config(pts_per_section=12, n_span=8)
    g0 = geometry(cfg.u_base, cfg)
    valid = [generate_geometry(u, cfg, g0).valid for u in sample_design(cfg, 256)]
    assert np.mean(valid) >= 0.95


def test_out_of_box_design_rejected(small_cfg):
    with pytest.raises(ConfigError):
        generate_geometry(np.full(small_cfg.M, 1.5), small_cfg)
