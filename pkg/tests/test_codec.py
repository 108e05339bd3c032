import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbrc.allocator import RateControlDecision
from rbrc.bitstream import BitReader, BitWriter, decode_frame, write_frame
from rbrc.codec import (INTER, INTRA, SKIP, block_bits, encode_frame, encode_mb, encode_picture,
                        forward_transform, inverse_transform, mse_to_psnr, psnr, se_bits,
                        split_blocks, merge_blocks, ue_bits)
from rbrc.lagrange import original_lambda
from rbrc.regions import RegionMap
from rbrc.synthetic import SyntheticSpec, gen_sequence
from rbrc.yuv_io import VideoSpec


def _clip(n=3, kind="textured", **kw):
    return [f.luma for f in gen_sequence(SyntheticSpec(kind, seed=11, **kw), VideoSpec(64, 48, 15, n))]


def _uniform(qp, n):
    return RateControlDecision((qp,) * 3, (0,) * 3, 0, 0, "x"), RegionMap.uniform(n)


def test_exp_golomb_lengths():
    assert list(ue_bits([0, 1, 2, 3, 6, 7])) == [1, 3, 3, 5, 5, 7]
    assert list(se_bits([0, 1, -1, 2, -2])) == [1, 3, 3, 5, 5]
    for v in range(200):
        bw = BitWriter()
        bw.ue(v)
        assert len(bw) == ue_bits(v)
        assert BitReader(bw.to_bytes(), len(bw)).ue() == v


@settings(max_examples=200, deadline=None)
@given(st.integers(-5000, 5000))
def test_signed_round_trip(v):
    bw = BitWriter()
    bw.se(v)
    assert len(bw) == se_bits(v)
    assert BitReader(bw.to_bytes(), len(bw)).se() == v


def test_transform_is_orthonormal(rng):
    blocks = rng.normal(size=(10, 4, 4))
    back = inverse_transform(forward_transform(blocks))
    np.testing.assert_allclose(back, blocks, atol=1e-12)
    np.testing.assert_allclose((forward_transform(blocks) ** 2).sum(), (blocks ** 2).sum())


def test_block_split_round_trip(rng):
    mb = rng.integers(0, 256, (16, 16))
    np.testing.assert_array_equal(merge_blocks(split_blocks(mb)), mb)
    assert block_bits(np.zeros(16, int)) == 1


def test_identical_source_skips():
    plane = _clip(1)[0]
    for qp in (10, 30, 50):
        res, rec = encode_mb(plane[:16, :16], plane, qp, 10.0, 3.0)
        assert res.mode == SKIP and res.sse == 0 and res.bits == 1


def test_huge_lambda_forces_skip(rng):
    src = rng.integers(0, 256, (16, 16), dtype=np.uint8)
    ref = rng.integers(0, 256, (48, 48), dtype=np.uint8)
    res, _ = encode_mb(src, ref, 30, 1e12, 1e6)
    assert res.mode == SKIP


def test_intra_frame_all_intra():
    f = _clip(1)[0]
    dec, reg = _uniform(30, 12)
    stats, rec = encode_frame(f, None, dec, reg, original_lambda((30,) * 3), intra=True)
    assert set(stats.modes) == {INTRA}
    assert rec.shape == f.shape and rec.dtype == np.uint8


def test_all_skip_static_frame():
    f = _clip(1)[0]
    dec, reg = _uniform(30, 12)
    stats, rec = encode_frame(f, f, dec, reg, original_lambda((30,) * 3))
    assert stats.frame_bits == 12 and (stats.mse == 0).all()
    np.testing.assert_array_equal(rec, f)


def test_deterministic():
    a, b = _clip(2)[:2]
    dec, reg = _uniform(28, 12)
    lam = original_lambda((28,) * 3)
    s1, r1 = encode_frame(b, a, dec, reg, lam)
    s2, r2 = encode_frame(b, a, dec, reg, lam)
    np.testing.assert_array_equal(s1.bits, s2.bits)
    np.testing.assert_array_equal(r1, r2)


def test_frame_bits_sum():
    a, b = _clip(2)[:2]
    dec, reg = _uniform(28, 12)
    stats, _ = encode_frame(b, a, dec, reg, original_lambda((28,) * 3))
    assert stats.frame_bits == int(stats.bits.sum())
    assert (stats.header_bits <= stats.bits).all()


@pytest.mark.parametrize("qp", [16, 28, 40])
def test_bitstream_round_trip(qp):
    frames = _clip(3)
    grid_n = 12
    qps = np.full(grid_n, qp)
    qps[::3] = qp + 4  # exercise qp deltas
    lam = np.full(grid_n, 0.85 * 2 ** ((qp - 12) / 3))
    stats, rec0, enc = encode_picture(frames[0], None, qps, lam, np.sqrt(lam), keep_levels=True)
    data, nbits = write_frame(enc.results, enc.grid)
    assert nbits == stats.frame_bits
    np.testing.assert_array_equal(decode_frame(data, nbits, None, frames[0].shape), rec0)
    ref = rec0
    for f in frames[1:]:
        stats, rec, enc = encode_picture(f, ref, qps, lam, np.sqrt(lam), keep_levels=True)
        data, nbits = write_frame(enc.results, enc.grid)
        assert nbits == stats.frame_bits
        assert set(stats.modes) & {INTER, SKIP}
        np.testing.assert_array_equal(decode_frame(data, nbits, ref, f.shape), rec)
        ref = rec


def test_qp_sweep_monotone():
    frames = [f.luma for f in gen_sequence(SyntheticSpec("textured", seed=3),
                                           VideoSpec(176, 144, 15, 2))]
    n = 99
    bits, mses = [], []
    for qp in range(12, 49, 4):
        dec, reg = _uniform(qp, n)
        stats, _ = encode_frame(frames[1], frames[0], dec, reg, original_lambda((qp,) * 3))
        bits.append(stats.frame_bits)
        mses.append(float(stats.mse.mean()))
    assert all(x >= y for x, y in zip(bits, bits[1:]))
    assert all(x <= y for x, y in zip(mses, mses[1:]))


def test_region_qps_move_region_quality():
    frames = [f.luma for f in gen_sequence(SyntheticSpec("textured", seed=3),
                                           VideoSpec(176, 144, 15, 2))]
    label = np.array([1, 2, 3] * 33, dtype=np.int8)
    reg = RegionMap(label)
    lam_u = original_lambda((30,) * 3)
    uni, _ = encode_frame(frames[1], frames[0], RateControlDecision((30,) * 3, (0,) * 3, 0, 0, "x"),
                          reg, lam_u)
    lam_r = original_lambda((20, 30, 40))
    mix, _ = encode_frame(frames[1], frames[0], RateControlDecision((20, 30, 40), (0,) * 3, 0, 0, "x"),
                          reg, lam_r)
    assert mix.mse[label == 1].mean() < uni.mse[label == 1].mean()
    assert mix.mse[label == 3].mean() > uni.mse[label == 3].mean()


def test_psnr():
    a = np.zeros((16, 16), np.uint8)
    assert psnr(a, a) == 99.99
    assert psnr(a, np.full((16, 16), 255, np.uint8)) == 0.0
    assert mse_to_psnr(256) == pytest.approx(10 * math.log10(65025 / 256))
    assert mse_to_psnr(256) == pytest.approx(24.05, abs=0.01)


def test_raster_order_enforced():
    from rbrc.codec import FrameEncoder
    f = _clip(1)[0]
    enc = FrameEncoder(f, None)
    with pytest.raises(ValueError):
        enc.encode_mb(3, 30, 1.0, 1.0)


def test_force_skip_frame():
    a, b = _clip(2)[:2]
    dec, reg = _uniform(28, 12)
    stats, _ = encode_frame(b, a, dec, reg, original_lambda((28,) * 3), force_skip=True)
    assert set(stats.modes) == {SKIP} and stats.frame_bits == 12
