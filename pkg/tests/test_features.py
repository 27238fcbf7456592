import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.fft import dct, idct

from dualvoice.features import (
    CONV_KERNELS,
    CONV_STRIDES,
    ConvBlock,
    ConvStackSpec,
    conv_extract,
    conv_forward,
    frame_count,
    gelu,
    gelu_grad,
    init_conv_weights,
    log_mel_energies,
    mel_filter_centers_hz,
    mfcc,
    mfcc_batch,
    mfcc_frame_count,
)


class TestMfcc:
    def test_segment_gives_8_frames_of_13(self):
        feats = mfcc(np.random.default_rng(0).uniform(-0.5, 0.5, 1600))
        assert feats.frames.shape == (8, 13)

    def test_short_input_is_empty_not_error(self):
        feats = mfcc(np.zeros(399))
        assert feats.frame_count == 0

    def test_all_zero_segment_finite_and_constant(self):
        feats = mfcc(np.zeros(1600))
        assert np.all(np.isfinite(feats.frames))
        assert np.allclose(feats.frames, feats.frames[0])  # log floor engaged

    def test_frame_count_formula(self):
        for n in (0, 399, 400, 559, 560, 1600, 4000):
            assert mfcc(np.zeros(n)).frame_count == mfcc_frame_count(n)

    def test_1khz_sine_peaks_at_nearest_filter(self):
        t = np.arange(1600) / 16000
        x = 0.3 * np.sin(2 * np.pi * 1000 * t)
        logmel = log_mel_energies(x)
        centers = mel_filter_centers_hz()
        expected_filter = int(np.argmin(np.abs(centers - 1000.0)))
        assert np.all(logmel.argmax(axis=1) == expected_filter)
        # oracle: direct DFT of the same windowed frame, same filterbank
        frame = x[:400] * np.hanning(400)
        k = np.arange(257)
        n = np.arange(400)
        basis = np.exp(-2j * np.pi * np.outer(k, n) / 512)
        direct_mag = np.abs(basis @ frame)
        from dualvoice.features import _FILTERBANK

        direct_energies = _FILTERBANK @ direct_mag
        assert int(np.argmax(direct_energies)) == expected_filter

    @given(n=st.integers(min_value=400, max_value=3000), seed=st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_trailing_samples_do_not_change_frames(self, n, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, n)
        slack = 160 - 1 - (n - 400) % 160
        extra = rng.uniform(-1, 1, slack)
        a = mfcc(x).frames
        b = mfcc(np.concatenate([x, extra])).frames
        assert np.array_equal(a, b)

    def test_dct_orthonormality(self, rng):
        x = rng.uniform(-0.5, 0.5, 1600)
        logmel = log_mel_energies(x)
        full = dct(logmel, type=2, axis=1, norm="ortho")
        back = idct(full, type=2, axis=1, norm="ortho")
        assert np.max(np.abs(back - logmel)) < 1e-9

    def test_batch_matches_single(self, rng):
        batch = rng.uniform(-0.5, 0.5, (3, 1600))
        stacked = mfcc_batch(batch)
        for i in range(3):
            assert np.array_equal(stacked[i], mfcc(batch[i]).frames)


class TestConvGeometry:
    def test_spec_requires_seven_blocks(self):
        with pytest.raises(ValueError, match="7 blocks"):
            ConvStackSpec((ConvBlock(64, 10, 5),))

    def test_block_fields_positive(self):
        with pytest.raises(ValueError):
            ConvBlock(0, 3, 2)

    def test_frame_count_examples(self):
        spec = ConvStackSpec.desk_scale()
        assert frame_count(1600, spec) == 4
        assert frame_count(400, spec) == 1
        assert frame_count(16000, spec) == 49  # one vector per ~20 ms
        assert frame_count(9, spec) == 0

    def test_default_geometry(self):
        spec = ConvStackSpec.default()
        assert tuple(b.kernel for b in spec.blocks) == CONV_KERNELS
        assert tuple(b.stride for b in spec.blocks) == CONV_STRIDES
        assert spec.feature_dim == 512
        assert ConvStackSpec.desk_scale().feature_dim == 64

    @given(n=st.integers(min_value=0, max_value=6000))
    @settings(max_examples=40, deadline=None)
    def test_extract_matches_formula(self, n):
        spec = ConvStackSpec(
            tuple(ConvBlock(1, k, s) for k, s in zip(CONV_KERNELS, CONV_STRIDES))
        )
        weights = init_conv_weights(spec, np.random.default_rng(0))
        out = conv_forward(np.zeros((1, n)), spec, weights)
        assert out.shape[1] == frame_count(n, spec)


class TestConvExtract:
    def test_shapes(self, rng):
        spec = ConvStackSpec.desk_scale()
        weights = init_conv_weights(spec, rng)
        feats = conv_extract(rng.uniform(-0.5, 0.5, 1600), spec, weights)
        assert feats.frames.shape == (4, 64)

    def test_too_short_gives_empty(self, rng):
        spec = ConvStackSpec.desk_scale()
        weights = init_conv_weights(spec, rng)
        assert conv_extract(np.zeros(9), spec, weights).frame_count == 0

    def test_linearity_with_identity_activation(self, rng):
        spec = ConvStackSpec.desk_scale()
        weights = init_conv_weights(spec, rng)  # zero biases
        x = rng.uniform(-0.5, 0.5, 1600)
        one = conv_extract(x, spec, weights, activation="identity").frames
        scaled = conv_extract(2.5 * x, spec, weights, activation="identity").frames
        rel = np.max(np.abs(scaled - 2.5 * one)) / np.max(np.abs(scaled))
        assert rel < 1e-6

    def test_unknown_activation_rejected(self, rng):
        spec = ConvStackSpec.desk_scale()
        weights = init_conv_weights(spec, rng)
        with pytest.raises(ValueError, match="activation"):
            conv_extract(np.zeros(1600), spec, weights, activation="tanh")

    def test_gelu_grad_matches_finite_difference(self):
        x = np.linspace(-3, 3, 101)
        h = 1e-6
        numeric = (gelu(x + h) - gelu(x - h)) / (2 * h)
        assert np.max(np.abs(numeric - gelu_grad(x))) < 1e-8
