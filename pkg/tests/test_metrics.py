import numpy as np
import pytest
from helpers import ssim_reference
from hypothesis import given, settings
from hypothesis import strategies as st

from mritask.errors import DataError, ShapeMismatchError
from mritask.metrics import (
    EvaluationSet,
    SSIMParams,
    evaluate_condition,
    format_mean_std,
    nrmse_set,
    round_half_up,
    ssim_pair,
    ssim_set,
)
from mritask.sampling import MaskSpec, make_mask
from mritask.synth import make_phantom_slices


class TestSSIM:
    def test_identical_images_score_one(self, rng):
        x = rng.random((32, 32))
        assert ssim_pair(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_constant_images_closed_form(self):
        params = SSIMParams()
        a = np.ones((16, 16))
        b = np.zeros((16, 16))
        c1 = params.c1
        assert ssim_pair(a, b, params) == pytest.approx(c1 / (1 + c1), abs=1e-10)
        assert c1 / (1 + c1) == pytest.approx(9.999e-5, rel=1e-3)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_bruteforce_reference(self, seed):
        rng = np.random.default_rng(seed)
        shape = rng.integers(16, 64, size=2)
        a = rng.random(tuple(shape))
        b = np.clip(a + 0.2 * rng.standard_normal(a.shape), 0, 1)
        params = SSIMParams()
        ref = ssim_reference(a, b, params.window, params.c1, params.c2)
        assert ssim_pair(a, b, params) == pytest.approx(ref, abs=1e-8)

    def test_symmetry(self, rng):
        a = rng.random((24, 24))
        b = rng.random((24, 24))
        assert abs(ssim_pair(a, b) - ssim_pair(b, a)) < 1e-12

    def test_window_properties(self):
        params = SSIMParams()
        assert params.window.shape == (11, 11)
        assert params.window.sum() == pytest.approx(1.0, abs=1e-12)
        assert params.c1 == pytest.approx(1e-4)
        assert params.c2 == pytest.approx(9e-4)

    def test_image_smaller_than_window(self, rng):
        with pytest.raises(ShapeMismatchError):
            ssim_pair(rng.random((8, 8)), rng.random((8, 8)))

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatchError):
            ssim_pair(rng.random((16, 16)), rng.random((16, 17)))

    def test_set_average_follows_pair_scores(self, rng):
        refs = rng.random((3, 16, 16))
        recs = np.clip(refs + 0.1 * rng.standard_normal(refs.shape), 0, 1)
        es = EvaluationSet(refs, recs)
        per_pair = np.mean([ssim_pair(refs[i], recs[i]) for i in range(3)])
        assert ssim_set(es) == pytest.approx(per_pair, abs=1e-12)


class TestNRMSE:
    def test_perfect_reconstruction(self, rng):
        y = rng.random((3, 8, 8))
        assert nrmse_set(EvaluationSet(y, y.copy())) == 0.0

    def test_zero_reconstruction_is_one(self, rng):
        y = rng.random((3, 8, 8)) + 0.1
        assert nrmse_set(EvaluationSet(y, np.zeros_like(y))) == pytest.approx(1.0, abs=1e-12)

    def test_hand_case(self):
        y = np.array([[[3.0, 4.0]]])
        yhat = np.array([[[3.0, 0.0]]])
        assert nrmse_set(EvaluationSet(y, yhat)) == pytest.approx(0.8, abs=1e-12)

    def test_all_zero_reference_rejected(self):
        with pytest.raises(DataError):
            nrmse_set(EvaluationSet(np.zeros((1, 4, 4)), np.ones((1, 4, 4))))

    @given(st.floats(0.01, 100.0), st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_scale_invariance(self, c, seed):
        rng = np.random.default_rng(seed)
        y = rng.random((2, 6, 6)) + 0.1
        yhat = rng.random((2, 6, 6))
        base = nrmse_set(EvaluationSet(y, yhat))
        scaled = nrmse_set(EvaluationSet(c * y, c * yhat))
        assert scaled == pytest.approx(base, abs=1e-12, rel=1e-12)


class TestEvaluateCondition:
    def test_identity_case_matches_full_sampling_row(self):
        slices = make_phantom_slices(2, (64, 64), 3, seed=31)
        mask = make_mask(MaskSpec(width=64, k=1, low_count=8))
        scores = evaluate_condition(None, slices, mask)
        assert scores["ssim"] == pytest.approx(1.0, abs=1e-12)
        assert scores["nrmse"] == 0.0

    def test_zero_filled_degrades_with_k(self):
        slices = make_phantom_slices(16, (64, 64), 3, seed=32, texture=0.1, support=0.45)
        ssims, nrmses = [], []
        for k in (2, 3, 4, 5):
            mask = make_mask(MaskSpec(width=64, k=k, low_count=8))
            scores = evaluate_condition(None, slices, mask)
            ssims.append(scores["ssim"])
            nrmses.append(scores["nrmse"])
        assert nrmses == sorted(nrmses)
        assert ssims == sorted(ssims, reverse=True)


class TestFormatting:
    def test_rounding_rule(self):
        assert format_mean_std(0.9215, 0.0014) == "0.922/0.001"

    def test_integer_cells_render_bare(self):
        assert format_mean_std(1.0, 0.0) == "1/0"

    def test_three_decimals(self):
        assert format_mean_std(92.75, 2.2173) == "92.750/2.217"

    def test_single_observer_mean_only(self):
        assert format_mean_std(75.0, None) == "75"
        assert format_mean_std(75.123, None) == "75.123"

    def test_half_up(self):
        assert round_half_up(0.0005, 3) == 0.001
        assert round_half_up(2.7115, 2) == 2.71
        assert round_half_up(3.478, 2) == 3.48
