import math

import numpy as np
import pytest

from vmsod.decoder import decode, init_decoder, mr_refine
from vmsod.metrics import total_loss
from vmsod.tensor import ShapeError, concat_channels, relu, upsample_bilinear_x2

DESK_CHANNELS = (16, 32, 64, 128)


def make_pyramid(channels, base, rng=None):
    """Fused pyramid with stage-1 extent ``base`` (so full res is 4*base)."""
    shapes = [(c, base // 2**i, base // 2**i) for i, c in enumerate(channels)]
    if rng is None:
        return [np.zeros(s) for s in shapes]
    return [rng.standard_normal(s) for s in shapes]


class TestMrRefine:
    def test_zero_coarse_depends_only_on_fine(self):
        rng = np.random.default_rng(0)
        w = init_decoder(rng, DESK_CHANNELS).refine[0]
        fine = rng.standard_normal((16, 8, 8))
        got = mr_refine(np.zeros((32, 4, 4)), fine, w)
        upsampled = w.lateral(upsample_bilinear_x2(np.zeros((32, 4, 4))))
        want = w.final(relu(w.merge(upsampled * fine + w.reduce(concat_channels(upsampled, fine)), padding=1)))
        assert np.array_equal(got, want)

    def test_desk_shapes(self):
        rng = np.random.default_rng(1)
        w = init_decoder(rng, DESK_CHANNELS).refine[0]
        out = mr_refine(rng.standard_normal((32, 8, 8)), rng.standard_normal((16, 16, 16)), w)
        assert out.shape == (16, 16, 16)

    def test_full_stage_shapes(self):
        rng = np.random.default_rng(2)
        w = init_decoder(rng, (96, 192, 384, 768)).refine[0]
        out = mr_refine(rng.standard_normal((192, 40, 40)), rng.standard_normal((96, 80, 80)), w)
        assert out.shape == (96, 80, 80)

    def test_mismatch_rejected(self):
        w = init_decoder(np.random.default_rng(3), DESK_CHANNELS).refine[0]
        with pytest.raises(ShapeError):
            mr_refine(np.zeros((32, 4, 4)), np.zeros((16, 10, 10)), w)


class TestDecode:
    def test_zero_pyramid_gives_uniform_half_maps(self):
        w = init_decoder(np.random.default_rng(4), DESK_CHANNELS)
        preds, final = decode(make_pyramid(DESK_CHANNELS, 16), w)
        assert len(preds) == 5
        for p in preds:
            assert p.shape == (1, 64, 64)
            assert np.array_equal(p, np.full((1, 64, 64), 0.5))
        assert np.array_equal(final, preds[0])

    def test_five_half_maps_sum_to_five_log_two(self):
        w = init_decoder(np.random.default_rng(5), DESK_CHANNELS)
        preds, _ = decode(make_pyramid(DESK_CHANNELS, 16), w)
        gt = np.zeros((64, 64))
        gt[10:30, 20:50] = 1.0
        assert abs(total_loss([p[0] for p in preds], gt) - 5 * math.log(2)) < 1e-12

    def test_outputs_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(6)
        w = init_decoder(rng, DESK_CHANNELS)
        preds, _ = decode(make_pyramid(DESK_CHANNELS, 16, rng), w)
        for p in preds:
            assert np.all(p > 0.0) and np.all(p < 1.0)

    def test_wrong_stage_count_rejected(self):
        w = init_decoder(np.random.default_rng(7), DESK_CHANNELS)
        with pytest.raises(ShapeError):
            decode(make_pyramid(DESK_CHANNELS, 16)[:3], w)

    def test_decode_is_deterministic(self):
        rng = np.random.default_rng(8)
        pyramid = make_pyramid(DESK_CHANNELS, 16, rng)
        w = init_decoder(np.random.default_rng(9), DESK_CHANNELS)
        a, _ = decode(pyramid, w)
        b, _ = decode([p.copy() for p in pyramid], w)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa, pb)
