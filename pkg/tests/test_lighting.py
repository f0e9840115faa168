"""Directional-plus-ambient light model: rendering, fitting, and parsing."""

import numpy as np
import pytest

from relight import (
    AlphaMask,
    FloatImage,
    FitOptions,
    LightModel,
    NormalMap,
    fit_light_constrained,
    fit_light_lstsq,
    light_from_angles,
    normalize_normals,
    render_lambertian,
)
from relight.lighting import parse_light_spec, resize_normals
from relight.optim import InsufficientDataError

from synth import bump_normals, feasible_light, light_l2_error, random_normals


class TestNormalMap:
    def test_rejects_non_unit(self):
        with pytest.raises(ValueError, match="unit"):
            NormalMap(np.full((2, 2, 3), 1.0))

    def test_rejects_back_facing(self):
        v = np.zeros((2, 2, 3))
        v[:, :, 2] = -1.0
        with pytest.raises(ValueError, match="nz"):
            NormalMap(v)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError, match=r"\(H, W, 3\)"):
            NormalMap(np.zeros((2, 2)))

    def test_normalize_rescales(self):
        v = np.zeros((3, 3, 3))
        v[:, :, 2] = 5.0
        n = normalize_normals(v)
        np.testing.assert_allclose(n.data[:, :, 2], 1.0)

    def test_normalize_zero_vector_becomes_camera_facing(self):
        n = normalize_normals(np.zeros((2, 2, 3)))
        np.testing.assert_allclose(n.data[:, :, 2], 1.0)

    def test_normalize_clamps_tiny_negative_nz(self):
        v = np.zeros((1, 1, 3))
        v[0, 0] = [1.0, 0.0, -1e-5]
        n = normalize_normals(v)
        assert n.data[0, 0, 2] == 0.0
        np.testing.assert_allclose(np.linalg.norm(n.data[0, 0]), 1.0)

    def test_normalize_rejects_genuinely_back_facing(self):
        v = np.zeros((1, 1, 3))
        v[0, 0] = [0.0, 0.0, -0.5]
        with pytest.raises(ValueError, match="flip"):
            normalize_normals(v)

    def test_resize_keeps_unit_length(self):
        rng = np.random.default_rng(31)
        n = random_normals(rng, 8, 8)
        out = resize_normals(n, 5, 5)
        np.testing.assert_allclose(np.linalg.norm(out.data, axis=2), 1.0, atol=1e-12)


class TestLightModel:
    def test_round_trips_through_json(self):
        light = LightModel(direction=np.array([0.1, -0.2, 0.3]), ambient=0.7)
        back = LightModel.from_json(light.to_json())
        np.testing.assert_allclose(back.direction, light.direction)
        assert back.ambient == light.ambient

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            LightModel(direction=np.array([np.inf, 0, 0]), ambient=0.0)

    def test_from_dict_names_missing_field(self):
        with pytest.raises(ValueError, match="lz"):
            LightModel.from_dict({"lx": 0, "ly": 0, "c": 1})


class TestRenderLambertian:
    def test_single_pixel_oracle(self):
        n = NormalMap(np.array([[[0.0, 0.0, 1.0]]]))
        light = LightModel(direction=np.array([0.0, 0.0, 2.0]), ambient=0.5)
        out = render_lambertian(n, light)
        assert out.data[0, 0, 0] == 2.5

    def test_clamps_negative_response(self):
        n = NormalMap(np.array([[[0.0, 0.0, 1.0]]]))
        light = LightModel(direction=np.array([0.0, 0.0, -1.0]), ambient=0.2)
        assert render_lambertian(n, light).data[0, 0, 0] == 0.0

    def test_ambient_only_is_flat(self):
        rng = np.random.default_rng(32)
        n = random_normals(rng, 6, 6)
        out = render_lambertian(n, LightModel(direction=np.zeros(3), ambient=0.6))
        np.testing.assert_allclose(out.data, 0.6)


class TestUnconstrainedFit:
    def test_exact_recovery_noiseless(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            normals = random_normals(rng, 12, 12)
            light = feasible_light(rng)
            shading = render_lambertian(normals, light)
            rep = fit_light_lstsq(normals, shading)
            assert light_l2_error(rep.light, light) < 1e-6
            assert rep.residual_mse < 1e-12
            assert not rep.degenerate
            assert rep.iterations == 0

    def test_mask_restricts_the_fit(self):
        rng = np.random.default_rng(34)
        normals = random_normals(rng, 10, 10)
        light = feasible_light(rng)
        shading = render_lambertian(normals, light).data.copy()
        shading[:5] = 99.0  # corrupt the half the mask excludes
        mask = np.zeros((10, 10))
        mask[5:] = 1.0
        rep = fit_light_lstsq(normals, FloatImage(shading), AlphaMask(mask))
        assert light_l2_error(rep.light, light) < 1e-6

    def test_too_few_pixels_raises(self):
        rng = np.random.default_rng(35)
        normals = random_normals(rng, 4, 4)
        shading = FloatImage(np.ones((4, 4, 1)))
        mask = np.zeros((4, 4))
        mask[0, :3] = 1.0
        with pytest.raises(InsufficientDataError, match="4"):
            fit_light_lstsq(normals, shading, AlphaMask(mask))

    def test_constant_normals_flagged_degenerate(self):
        # A flat normal field cannot separate direction from ambient.
        v = np.zeros((8, 8, 3))
        v[:, :, 2] = 1.0
        rep = fit_light_lstsq(NormalMap(v), FloatImage(np.full((8, 8, 1), 1.3)))
        assert rep.degenerate

    def test_dimension_mismatch_raises(self):
        rng = np.random.default_rng(36)
        with pytest.raises(ValueError, match="mismatch"):
            fit_light_lstsq(random_normals(rng, 4, 4), FloatImage(np.ones((5, 5, 1))))


class TestConstrainedFit:
    def test_recovery_on_feasible_configs(self):
        rng = np.random.default_rng(37)
        for _ in range(10):
            normals = random_normals(rng, 12, 12)
            light = feasible_light(rng)
            shading = render_lambertian(normals, light)
            rep = fit_light_constrained(normals, shading)
            assert light_l2_error(rep.light, light) < 1e-3
            assert rep.light.direction[2] >= 0.0
            assert rep.light.ambient >= 0.0

    def test_result_is_always_feasible(self):
        # Shading that an infeasible light explains best: the fit must still
        # return lz >= 0 and ambient >= 0.
        rng = np.random.default_rng(38)
        normals = random_normals(rng, 10, 10)
        bad = LightModel(direction=np.array([0.2, 0.1, -0.6]), ambient=0.9)
        shading = render_lambertian(normals, bad)
        rep = fit_light_constrained(normals, shading)
        assert rep.light.direction[2] >= 0.0
        assert rep.light.ambient >= 0.0

    def test_octant_constraint_bounds_every_component(self):
        rng = np.random.default_rng(39)
        normals = random_normals(rng, 10, 10)
        light = LightModel(direction=np.array([-0.4, -0.3, 0.5]), ambient=0.9)
        shading = render_lambertian(normals, light)
        rep = fit_light_constrained(
            normals, shading, opts=FitOptions(octant_constraint=True)
        )
        assert np.all(rep.light.direction >= 0.0)
        assert rep.light.ambient >= 0.0

    def test_agrees_with_lstsq_when_feasible(self):
        rng = np.random.default_rng(40)
        for _ in range(5):
            normals = random_normals(rng, 12, 12)
            light = feasible_light(rng)
            shading = render_lambertian(normals, light)
            unc = fit_light_lstsq(normals, shading)
            con = fit_light_constrained(normals, shading)
            assert light_l2_error(con.light, unc.light) < 1e-4

    def test_bump_field_also_recovers(self):
        rng = np.random.default_rng(41)
        normals = bump_normals(14, 14)
        light = feasible_light(rng)
        shading = render_lambertian(normals, light)
        rep = fit_light_constrained(normals, shading)
        assert light_l2_error(rep.light, light) < 1e-3

    def test_report_dict_shape(self):
        rng = np.random.default_rng(42)
        normals = random_normals(rng, 8, 8)
        shading = render_lambertian(normals, feasible_light(rng))
        d = fit_light_constrained(normals, shading).to_dict()
        assert set(d) == {"light", "residual_mse", "iterations", "degenerate"}
        assert set(d["light"]) == {"lx", "ly", "lz", "c"}


class TestAnglesAndParsing:
    def test_angle_zero_points_down_camera_axis(self):
        light = light_from_angles(0.0, 0.0, 2.0, 0.3)
        np.testing.assert_allclose(light.direction, [0.0, 0.0, 2.0], atol=1e-15)
        assert light.ambient == 0.3

    def test_quarter_turns(self):
        right = light_from_angles(np.pi / 2, 0.0, 1.0, 0.0)
        np.testing.assert_allclose(right.direction, [1.0, 0.0, 0.0], atol=1e-15)
        up = light_from_angles(0.0, np.pi / 2, 1.0, 0.0)
        np.testing.assert_allclose(up.direction, [0.0, 1.0, 0.0], atol=1e-15)

    def test_direction_magnitude_is_intensity(self):
        rng = np.random.default_rng(43)
        for _ in range(10):
            az, el = rng.uniform(-np.pi, np.pi, 2)
            k = rng.uniform(0, 3)
            light = light_from_angles(az, el, k, 0.0)
            np.testing.assert_allclose(np.linalg.norm(light.direction), k)

    def test_negative_strengths_rejected(self):
        with pytest.raises(ValueError, match="intensity"):
            light_from_angles(0, 0, -1.0, 0.0)
        with pytest.raises(ValueError, match="ambient"):
            light_from_angles(0, 0, 1.0, -0.1)

    def test_parse_raw_form(self):
        light = parse_light_spec({"lx": 0.1, "ly": 0.2, "lz": 0.3, "c": 0.4})
        np.testing.assert_allclose(light.direction, [0.1, 0.2, 0.3])
        assert light.ambient == 0.4

    def test_parse_raw_form_requires_all_fields(self):
        with pytest.raises(ValueError, match="missing"):
            parse_light_spec({"lx": 0.1, "ly": 0.2, "lz": 0.3})

    def test_parse_angle_form_with_defaults(self):
        light = parse_light_spec({"intensity": 2.0})
        np.testing.assert_allclose(light.direction, [0.0, 0.0, 2.0], atol=1e-15)
        assert light.ambient == 0.0

    def test_parse_unknown_key_named_in_error(self):
        with pytest.raises(ValueError, match="strength"):
            parse_light_spec({"azimuth": 0.0, "strength": 1.0})

    def test_parse_rejects_non_dict_and_empty(self):
        with pytest.raises(ValueError, match="object"):
            parse_light_spec([1, 2, 3])
        with pytest.raises(ValueError, match="lx/ly/lz/c"):
            parse_light_spec({})
