"""Lighting-image generation and its closed-form parameter VJP."""

import numpy as np
import pytest

from advlight import (
    Direction,
    LightingParams,
    flip_horizontal,
    generate_lighting_image,
    lighting_vjp_params,
    parse_hex_color,
)


def params(cs=(1.0, 0.0, 0.0), ce=(0.0, 0.0, 1.0), d=Direction.LEFT_TO_RIGHT, w=1.0):
    return LightingParams(start_color=cs, end_color=ce, direction=d, weight=w)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def test_worked_example_four_columns():
    # width 4, w=1: t = {0.125, 0.375, 0.625, 0.875}, s = 0.5
    # blend b = {0, 0, 0.25, 0.75}; red = 1-b, blue = b
    img = generate_lighting_image(params(), 2, 4)
    expect_red = np.array([1.0, 1.0, 0.75, 0.25])
    expect_blue = np.array([0.0, 0.0, 0.25, 0.75])
    for y in range(2):
        assert np.max(np.abs(img.data[y, :, 0] - expect_red)) <= 1e-6
        assert np.max(np.abs(img.data[y, :, 1])) <= 1e-6
        assert np.max(np.abs(img.data[y, :, 2] - expect_blue)) <= 1e-6


def test_weight_two_gives_constant_start_color():
    for d in Direction:
        img = generate_lighting_image(params(d=d, w=2.0), 5, 6)
        assert np.array_equal(img.data, np.broadcast_to([1.0, 0.0, 0.0], (5, 6, 3)))


def test_equal_colors_give_constant_image():
    img = generate_lighting_image(params(cs=(0.5, 0.5, 0.5), ce=(0.5, 0.5, 0.5), w=0.3), 4, 4)
    assert np.allclose(img.data, 0.5, atol=1e-12)


def test_horizontal_flip_symmetry_exact():
    for w in (0.0, 0.4, 1.0, 1.7):
        p_lr = params(w=w, d=Direction.LEFT_TO_RIGHT)
        p_rl = params(w=w, d=Direction.RIGHT_TO_LEFT)
        a = generate_lighting_image(p_lr, 3, 9)
        b = flip_horizontal(generate_lighting_image(p_rl, 3, 9))
        assert np.array_equal(a.data, b.data)


def test_vertical_flip_symmetry_exact():
    for w in (0.0, 0.4, 1.0, 1.7):
        p_tb = params(w=w, d=Direction.TOP_TO_BOTTOM)
        p_bt = params(w=w, d=Direction.BOTTOM_TO_TOP)
        a = generate_lighting_image(p_tb, 9, 3)
        b = generate_lighting_image(p_bt, 9, 3)
        assert np.array_equal(a.data, b.data[::-1])


def test_monotone_along_axis():
    rng = np.random.default_rng(30)
    for _ in range(10):
        cs = tuple(rng.uniform(0, 1, 3))
        ce = tuple(rng.uniform(0, 1, 3))
        w = float(rng.uniform(0, 1.9))
        img = generate_lighting_image(params(cs=cs, ce=ce, w=w), 2, 24)
        for ch in range(3):
            diffs = np.diff(img.data[0, :, ch])
            if ce[ch] >= cs[ch]:
                assert np.all(diffs >= -1e-12)
            else:
                assert np.all(diffs <= 1e-12)


def test_values_stay_on_color_segment():
    rng = np.random.default_rng(31)
    for _ in range(10):
        cs = rng.uniform(0, 1, 3)
        ce = rng.uniform(0, 1, 3)
        img = generate_lighting_image(
            params(cs=tuple(cs), ce=tuple(ce), w=float(rng.uniform(0, 2))), 5, 5
        )
        lo = np.minimum(cs, ce) - 1e-12
        hi = np.maximum(cs, ce) + 1e-12
        assert np.all(img.data >= lo) and np.all(img.data <= hi)


def test_param_validation():
    with pytest.raises(ValueError):
        params(cs=(1.2, 0.0, 0.0))
    with pytest.raises(ValueError):
        params(w=-0.1)
    with pytest.raises(ValueError):
        params(w=2.5)
    with pytest.raises(ValueError):
        params(cs=(float("nan"), 0.0, 0.0))
    with pytest.raises(ValueError):
        generate_lighting_image(params(), 0, 4)


def test_projected_clamps_into_box():
    p = LightingParams.projected((1.3, -0.2, 0.5), (0.1, 0.9, 2.0), Direction.TOP_TO_BOTTOM, 2.8)
    assert p.start_color == (1.0, 0.0, 0.5)
    assert p.end_color == (0.1, 0.9, 1.0)
    assert p.weight == 2.0


def test_parse_hex_color():
    assert parse_hex_color("#FF0000") == (1.0, 0.0, 0.0)
    assert parse_hex_color("#0000ff") == (0.0, 0.0, 1.0)
    mid = parse_hex_color("#808080")
    assert all(abs(v - 128 / 255) < 1e-12 for v in mid)
    for bad in ("FF0000", "#FF00", "#GG0000", ""):
        with pytest.raises(ValueError):
            parse_hex_color(bad)


# ---------------------------------------------------------------------------
# VJP
# ---------------------------------------------------------------------------


def test_vjp_zero_grad_gives_zero_params():
    gs, ge, gw = lighting_vjp_params(params(), 4, 5, np.zeros((4, 5, 3)))
    assert np.all(gs == 0) and np.all(ge == 0) and gw == 0.0


def test_vjp_weight_two_kills_end_color_and_weight():
    rng = np.random.default_rng(32)
    grad = rng.standard_normal((4, 5, 3))
    gs, ge, gw = lighting_vjp_params(params(w=2.0), 4, 5, grad)
    assert np.all(ge == 0)
    assert gw == 0.0
    # with b == 0 everywhere the start-color gradient is the plain channel sum
    assert np.allclose(gs, grad.sum(axis=(0, 1)), atol=1e-12)


def test_vjp_shape_mismatch_errors():
    with pytest.raises(ValueError):
        lighting_vjp_params(params(), 4, 5, np.zeros((5, 4, 3)))


def test_vjp_matches_finite_differences():
    # central differences over all 7 continuous parameters, all directions
    rng = np.random.default_rng(33)
    step = 1e-3
    for trial in range(20):
        d = list(Direction)[trial % 4]
        cs = rng.uniform(0.05, 0.95, 3)
        ce = rng.uniform(0.05, 0.95, 3)
        h, w_px = int(rng.integers(3, 8)), int(rng.integers(3, 8))
        # keep the weight kink t == w/2 well away from both the probe step
        # and the pixel-center t values
        while True:
            weight = float(rng.uniform(0.1, 1.7))
            t = (np.arange(max(h, w_px)) + 0.5) / max(h, w_px)
            if np.min(np.abs(t - weight / 2)) > 2.5 * step:
                break
        probe = rng.standard_normal((h, w_px, 3))

        def objective(vec):
            p = LightingParams(
                start_color=tuple(vec[0:3]), end_color=tuple(vec[3:6]), direction=d, weight=vec[6]
            )
            return float(np.sum(probe * generate_lighting_image(p, h, w_px).data))

        theta = np.concatenate([cs, ce, [weight]])
        gs, ge, gw = lighting_vjp_params(
            LightingParams(tuple(cs), tuple(ce), d, weight), h, w_px, probe
        )
        analytic = np.concatenate([gs, ge, [gw]])
        numeric = np.zeros(7)
        for k in range(7):
            plus = theta.copy()
            minus = theta.copy()
            plus[k] += step
            minus[k] -= step
            numeric[k] = (objective(plus) - objective(minus)) / (2 * step)
        rel = np.linalg.norm(analytic - numeric) / (1e-12 + np.linalg.norm(numeric))
        assert rel <= 1e-3, f"trial {trial}: rel err {rel}"
