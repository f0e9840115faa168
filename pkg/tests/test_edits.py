"""The four-parameter albedo edit space: apply, sample, serialize, and fit."""

import itertools

import numpy as np
import pytest

from relight import (
    AlphaMask,
    EditParams,
    FloatImage,
    apply_color_curve,
    apply_edit_sequence,
    apply_exposure,
    apply_saturation,
    apply_white_balance,
    fit_edit_params,
    luminance,
    sample_random_edits,
)
from relight.edits import (
    EDIT_KINDS,
    edit_params_from_payload,
    make_edit_sample,
    match_masked_statistics,
)
from relight.optim import InsufficientDataError

from synth import disk_mask, random_albedo


def masked_mse(a, b, mask):
    w = mask.data[:, :, None]
    return float(np.sum(w * (a.data - b.data) ** 2) / np.sum(np.broadcast_to(w, a.data.shape)))


class TestExposure:
    def test_identity(self):
        a = random_albedo(np.random.default_rng(1), 4, 4)
        assert np.array_equal(apply_exposure(a, 1.0).data, a.data)

    def test_doubles_quarter_to_half(self):
        a = FloatImage(np.full((2, 2, 3), 0.25))
        np.testing.assert_allclose(apply_exposure(a, 2.0).data, 0.5)

    def test_inverse_pair(self):
        a = random_albedo(np.random.default_rng(2), 5, 5)
        back = apply_exposure(apply_exposure(a, 0.5), 2.0)
        np.testing.assert_allclose(back.data, a.data, atol=1e-7)

    def test_out_of_range_rejected(self):
        a = FloatImage(np.ones((2, 2, 3)))
        for k in (0.49, 2.01):
            with pytest.raises(ValueError, match="exposure"):
                apply_exposure(a, k)


class TestSaturation:
    def test_identity(self):
        a = random_albedo(np.random.default_rng(3), 4, 4)
        np.testing.assert_allclose(apply_saturation(a, 1.0).data, a.data, atol=1e-15)

    def test_zero_gives_replicated_luminance(self):
        a = random_albedo(np.random.default_rng(4), 4, 4)
        out = apply_saturation(a, 0.0)
        lum = luminance(a)
        for c in range(3):
            np.testing.assert_allclose(out.data[:, :, c], lum.data[:, :, 0], atol=1e-15)

    def test_gray_is_a_fixed_point(self):
        a = FloatImage(np.full((3, 3, 3), 0.5))
        np.testing.assert_allclose(apply_saturation(a, 2.0).data, 0.5, atol=1e-15)

    def test_overdrive_clamps_at_zero(self):
        # Strong saturation pushes weak channels below zero; outputs clamp.
        a = FloatImage(np.array([[[0.0, 1.0, 0.0]]]))
        out = apply_saturation(a, 2.0)
        assert float(out.data.min()) == 0.0

    def test_out_of_range_rejected(self):
        a = FloatImage(np.ones((2, 2, 3)))
        with pytest.raises(ValueError, match="saturation"):
            apply_saturation(a, 2.1)


class TestWhiteBalance:
    def test_identity(self):
        a = random_albedo(np.random.default_rng(5), 4, 4)
        assert np.array_equal(apply_white_balance(a, (1.0, 1.0, 1.0)).data, a.data)

    def test_per_channel_gains(self):
        a = FloatImage(np.array([[[0.2, 0.4, 0.6]]]))
        out = apply_white_balance(a, (1.0, 0.5, 1.0))
        np.testing.assert_allclose(out.data, [[[0.2, 0.2, 0.6]]])

    def test_composition_is_productwise(self):
        a = random_albedo(np.random.default_rng(6), 4, 4)
        g1, g2 = (0.9, 0.5, 0.7), (0.8, 0.6, 1.0)
        twice = apply_white_balance(apply_white_balance(a, g1), g2)
        once = apply_white_balance(a, tuple(x * y for x, y in zip(g1, g2)))
        np.testing.assert_allclose(twice.data, once.data, atol=1e-15)

    def test_uniform_gain_inverted_by_exposure(self):
        a = random_albedo(np.random.default_rng(7), 5, 5)
        back = apply_exposure(apply_white_balance(a, (0.5, 0.5, 0.5)), 2.0)
        np.testing.assert_allclose(back.data, a.data, atol=1e-7)

    def test_out_of_range_rejected(self):
        a = FloatImage(np.ones((2, 2, 3)))
        with pytest.raises(ValueError, match="white_balance"):
            apply_white_balance(a, (1.0, 1.0, 1.5))
        with pytest.raises(ValueError, match="white_balance"):
            apply_white_balance(a, (0.05, 1.0, 1.0))


class TestColorCurve:
    def test_identity_on_unit_range(self):
        a = random_albedo(np.random.default_rng(8), 4, 4)
        np.testing.assert_allclose(apply_color_curve(a, (1.0, 1.0, 1.0)).data, a.data, atol=1e-15)

    def test_two_is_square_root(self):
        a = FloatImage(np.full((2, 2, 3), 0.25))
        np.testing.assert_allclose(apply_color_curve(a, (2.0, 2.0, 2.0)).data, 0.5)

    def test_small_values_darken_midtones(self):
        ramp = np.tile(np.linspace(0.05, 0.95, 16), (1, 1, 1)).reshape(1, 16, 1)
        a = FloatImage(np.repeat(ramp, 3, axis=2))
        lo = apply_color_curve(a, (0.1, 0.1, 0.1))
        hi = apply_color_curve(a, (0.5, 0.5, 0.5))
        assert np.all(lo.data < hi.data)

    def test_input_above_one_clamped_before_curve(self):
        a = FloatImage(np.full((1, 1, 3), 1.6))
        np.testing.assert_allclose(apply_color_curve(a, (2.0, 2.0, 2.0)).data, 1.0)

    def test_out_of_range_rejected(self):
        a = FloatImage(np.ones((2, 2, 3)))
        with pytest.raises(ValueError, match="color_curve"):
            apply_color_curve(a, (0.0, 1.0, 1.0))


class TestEditParams:
    def test_identity_construction(self):
        p = EditParams.identity("WSCE")
        assert p.exposure == 1.0
        assert p.saturation == 1.0
        np.testing.assert_allclose(p.white_balance, 1.0)
        np.testing.assert_allclose(p.color_curve, 1.0)

    def test_all_24_orders_accepted(self):
        for perm in itertools.permutations("WSCE"):
            EditParams.identity("".join(perm))

    def test_bad_orders_rejected(self):
        for order in ("WSC", "WSCX", "WWCE", "wsce"):
            with pytest.raises(ValueError, match="order"):
                EditParams.identity(order)

    def test_out_of_range_fields_rejected(self):
        with pytest.raises(ValueError, match="exposure"):
            EditParams(
                white_balance=np.ones(3),
                saturation=1.0,
                color_curve=np.ones(3),
                exposure=3.0,
                order="WSCE",
            )

    def test_json_round_trip(self):
        p = EditParams(
            white_balance=np.array([0.8, 0.9, 1.0]),
            saturation=1.4,
            color_curve=np.array([1.1, 0.9, 1.0]),
            exposure=0.7,
            order="ECWS",
        )
        q = EditParams.from_json(p.to_json())
        assert q == p

    def test_payload_with_partial_fields(self):
        params, active = edit_params_from_payload({"exposure": 1.5})
        assert active == ("exposure",)
        assert params.exposure == 1.5
        np.testing.assert_allclose(params.white_balance, 1.0)

    def test_payload_unknown_field_rejected(self):
        with pytest.raises(ValueError, match="contrast"):
            edit_params_from_payload({"contrast": 2.0})


class TestEditSequence:
    def test_empty_active_is_noop(self):
        a = random_albedo(np.random.default_rng(9), 6, 6)
        mask = disk_mask(6, 6)
        out = apply_edit_sequence(a, mask, EditParams.identity("WSCE"), active=())
        assert np.array_equal(out.data, a.data)

    def test_zero_mask_is_noop(self):
        a = random_albedo(np.random.default_rng(10), 6, 6)
        params, active = sample_random_edits(123)
        out = apply_edit_sequence(a, AlphaMask(np.zeros((6, 6))), params, active)
        assert np.array_equal(out.data, a.data)

    def test_identity_params_are_noop(self):
        a = random_albedo(np.random.default_rng(11), 6, 6)
        out = apply_edit_sequence(
            a, AlphaMask(np.ones((6, 6))), EditParams.identity("CSEW"), EDIT_KINDS
        )
        np.testing.assert_allclose(out.data, a.data, atol=1e-15)

    def test_single_edit_full_mask_reduces_to_raw_op(self):
        a = random_albedo(np.random.default_rng(12), 6, 6)
        params = EditParams(
            white_balance=np.ones(3),
            saturation=1.0,
            color_curve=np.ones(3),
            exposure=2.0,
            order="WSCE",
        )
        out = apply_edit_sequence(a, AlphaMask(np.ones((6, 6))), params, ("exposure",))
        np.testing.assert_allclose(out.data, 2.0 * a.data, atol=1e-15)

    def test_unmasked_pixels_bit_identical(self):
        a = random_albedo(np.random.default_rng(13), 8, 8)
        mask = disk_mask(8, 8)
        params, active = sample_random_edits(7)
        out = apply_edit_sequence(a, mask, params, active)
        outside = mask.data == 0.0
        assert np.array_equal(out.data[outside], a.data[outside])

    def test_order_changes_the_result(self):
        # Saturation and color curve do not commute on colorful inputs.
        a = random_albedo(np.random.default_rng(14), 6, 6)
        base = dict(
            white_balance=np.array([0.6, 1.0, 0.8]),
            saturation=1.8,
            color_curve=np.array([0.4, 1.3, 0.9]),
            exposure=1.7,
        )
        mask = AlphaMask(np.ones((6, 6)))
        one = apply_edit_sequence(a, mask, EditParams(order="SCWE", **base), EDIT_KINDS)
        two = apply_edit_sequence(a, mask, EditParams(order="CSWE", **base), EDIT_KINDS)
        assert not np.allclose(one.data, two.data)

    def test_outputs_stay_non_negative(self):
        rng = np.random.default_rng(15)
        mask = AlphaMask(np.ones((6, 6)))
        for seed in range(30):
            a = random_albedo(rng, 6, 6)
            params, active = sample_random_edits(seed)
            out = apply_edit_sequence(a, mask, params, active)
            assert float(out.data.min()) >= 0.0


class TestSampler:
    def test_deterministic_under_seed(self):
        assert sample_random_edits(99) == sample_random_edits(99)

    def test_values_inside_ranges(self):
        for seed in range(200):
            params, active = sample_random_edits(seed)
            assert 0.5 <= params.exposure <= 2.0
            assert 0.0 <= params.saturation <= 2.0
            assert np.all((0.1 <= params.white_balance) & (params.white_balance <= 1.0))
            assert np.all((0.0 < params.color_curve) & (params.color_curve <= 2.0))
            assert 1 <= len(active) <= 4
            assert set(active) <= set(EDIT_KINDS)

    def test_active_counts_roughly_uniform(self):
        counts = np.zeros(4)
        for seed in range(2000):
            _, active = sample_random_edits(seed)
            counts[len(active) - 1] += 1
        np.testing.assert_allclose(counts / 2000, 0.25, atol=0.04)

    def test_orders_cover_many_permutations(self):
        orders = {sample_random_edits(seed)[0].order for seed in range(500)}
        assert len(orders) == 24

    def test_make_edit_sample_respects_mask(self):
        a = random_albedo(np.random.default_rng(16), 8, 8)
        mask = disk_mask(8, 8)
        sample = make_edit_sample(a, mask, rng_seed=5)
        outside = mask.data == 0.0
        assert np.array_equal(sample.edited_albedo.data[outside], a.data[outside])
        assert np.array_equal(sample.original_albedo.data, a.data)
        assert set(sample.active_edits) <= set(EDIT_KINDS)


class TestFitEditParams:
    def test_identity_target_fits_to_identity(self):
        a = random_albedo(np.random.default_rng(17), 10, 10)
        mask = disk_mask(10, 10)
        fitted = fit_edit_params(a, a, mask)
        out = apply_edit_sequence(a, mask, fitted, EDIT_KINDS)
        assert masked_mse(out, a, mask) < 1e-5

    def test_recovers_known_exposure(self):
        a = random_albedo(np.random.default_rng(18), 10, 10)
        mask = disk_mask(10, 10)
        target = apply_exposure(a, 1.5)
        fitted = fit_edit_params(a, target, mask, active=("exposure",))
        assert abs(fitted.exposure - 1.5) < 0.02

    def test_recovers_wb_plus_exposure_residual(self):
        a = random_albedo(np.random.default_rng(19), 10, 10)
        mask = disk_mask(10, 10)
        # Interior point of the box; corner values are only reached asymptotically.
        target = apply_exposure(apply_white_balance(a, (0.5, 0.8, 0.9)), 1.6)
        fitted = fit_edit_params(
            a, target, mask, order="WSCE", active=("white_balance", "exposure")
        )
        out = apply_edit_sequence(a, mask, fitted, ("white_balance", "exposure"))
        assert masked_mse(out, target, mask) < 1e-4

    def test_never_worse_than_identity(self):
        rng = np.random.default_rng(20)
        a = random_albedo(rng, 10, 10)
        target = random_albedo(rng, 10, 10)  # unrelated target
        mask = disk_mask(10, 10)
        fitted = fit_edit_params(a, target, mask)
        ident = apply_edit_sequence(a, mask, EditParams.identity("WSCE"), EDIT_KINDS)
        out = apply_edit_sequence(a, mask, fitted, EDIT_KINDS)
        assert masked_mse(out, target, mask) <= masked_mse(ident, target, mask) + 1e-12

    def test_too_few_masked_pixels_raises(self):
        a = random_albedo(np.random.default_rng(21), 8, 8)
        mask = np.zeros((8, 8))
        mask[0, :8] = 1.0
        with pytest.raises(InsufficientDataError, match="16"):
            fit_edit_params(a, a, AlphaMask(mask))


class TestStatisticsMatching:
    def test_maps_masked_mean_and_std(self):
        rng = np.random.default_rng(22)
        fg = random_albedo(rng, 12, 12)
        bg = FloatImage(np.clip(rng.normal(0.6, 0.05, (12, 12, 3)), 0, 1))
        fg_mask = disk_mask(12, 12)
        bg_mask = AlphaMask(1.0 - fg_mask.data)
        out = match_masked_statistics(fg, fg_mask, bg, bg_mask)
        w = fg_mask.data
        wb = bg_mask.data
        for c in range(3):
            got_mean = np.sum(w * out.data[:, :, c]) / np.sum(w)
            want_mean = np.sum(wb * bg.data[:, :, c]) / np.sum(wb)
            np.testing.assert_allclose(got_mean, want_mean, atol=1e-6)

    def test_output_non_negative(self):
        rng = np.random.default_rng(23)
        fg = random_albedo(rng, 10, 10)
        bg = FloatImage(np.full((10, 10, 3), 0.01))
        mask = disk_mask(10, 10)
        out = match_masked_statistics(fg, mask, bg, AlphaMask(1.0 - mask.data))
        assert float(out.data.min()) >= 0.0

    def test_empty_mask_raises(self):
        a = random_albedo(np.random.default_rng(24), 6, 6)
        with pytest.raises(InsufficientDataError):
            match_masked_statistics(a, AlphaMask(np.zeros((6, 6))), a, AlphaMask(np.ones((6, 6))))
