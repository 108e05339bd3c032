import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import direct_projection
from rbrc.motion import GlobalMotionVector, estimate_gmv, project
from rbrc.synthetic import SyntheticSpec, gen_sequence, texture
from rbrc.yuv_io import FrameY, VideoSpec


def test_constant_projection():
    pc = project(FrameY(0, np.full((144, 176), 100, np.uint8)))
    assert np.all(pc.row_proj == 100) and np.all(pc.col_proj == 100)


def test_single_white_row():
    luma = np.zeros((144, 176), np.uint8)
    luma[37] = 255
    pc = project(luma)
    rows, cols = direct_projection(luma)
    assert pc.row_proj[37] == 255 and np.count_nonzero(pc.row_proj) == 1
    np.testing.assert_allclose(pc.col_proj, 255 / 144)
    np.testing.assert_allclose(pc.row_proj, rows)
    np.testing.assert_allclose(pc.col_proj, cols)


def test_vertical_gradient():
    luma = (np.arange(144)[:, None] % 256 * np.ones((1, 176))).astype(np.uint8)
    pc = project(luma)
    np.testing.assert_allclose(pc.row_proj, np.arange(144))
    np.testing.assert_allclose(pc.col_proj, pc.col_proj[0])


def test_identity_and_zero_range(rng):
    a = rng.integers(0, 256, (144, 176), dtype=np.uint8)
    b = rng.integers(0, 256, (144, 176), dtype=np.uint8)
    assert estimate_gmv(a, a, 16) == GlobalMotionVector(0, 0)
    assert estimate_gmv(a, b, 0) == GlobalMotionVector(0, 0)


def _shifted_pair(rng, dx, dy, h=144, w=176, margin=20):
    canvas = texture(rng, (h + 2 * margin, w + 2 * margin))
    prev = canvas[margin:margin + h, margin:margin + w]
    cur = canvas[margin + dy:margin + dy + h, margin + dx:margin + dx + w]
    return np.rint(cur).astype(np.uint8), np.rint(prev).astype(np.uint8)


def test_shift_2_3(rng):
    cur, prev = _shifted_pair(rng, 2, 3)
    assert estimate_gmv(cur, prev, 8).as_tuple() == (2, 3)


def test_shift_with_edge_fill(rng):
    # prev translated with replicated edges rather than fresh content
    prev = np.rint(texture(rng, (144, 176))).astype(np.uint8)
    pad = np.pad(prev, 8, mode="edge")
    cur = pad[8 + 3:8 + 3 + 144, 8 + 2:8 + 2 + 176]
    assert estimate_gmv(cur, prev, 8).as_tuple() == (2, 3)


@settings(max_examples=25, deadline=None)
@given(st.integers(-12, 12), st.integers(-12, 12), st.integers(0, 10_000))
def test_antisymmetry(dx, dy, seed):
    cur, prev = _shifted_pair(np.random.default_rng(seed), dx, dy)
    fwd = estimate_gmv(cur, prev, 16)
    back = estimate_gmv(prev, cur, 16)
    assert fwd == -back
    assert fwd.as_tuple() == (dx, dy)


def test_translate_sequence_recovered():
    frames = gen_sequence(SyntheticSpec("translate", shift=(2, 3), noise=0, seed=5),
                          VideoSpec(176, 144, 15, 4))
    for a, b in zip(frames[1:], frames[:-1]):
        assert estimate_gmv(a, b, 16).as_tuple() == (2, 3)


def test_negative_range_rejected(rng):
    a = rng.integers(0, 256, (16, 16), dtype=np.uint8)
    with pytest.raises(ValueError):
        estimate_gmv(a, a, -1)
