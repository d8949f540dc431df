import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import nearest_free_cell as oracle_free_cell
from riga.data import NormalizationParams
from riga.embed import FeatureEmbedding
from riga.imgmap import (
    GridTooSmallError,
    ImageSample,
    PixelMapping,
    build_mapping,
    clamp_unit,
    forward_transform,
    from_images,
    inverse_transform,
    minimum_grid,
    quantize_positions,
    read_pgm,
    tile_images,
    to_images,
    write_pgm,
)

positions = st.integers(1, 60).flatmap(
    lambda d: arrays(np.float64, (d, 2), elements=st.floats(-100, 100, allow_subnormal=False))
)
# coordinates on a 1/64 lattice: an affine map in floating point can erase
# differences far below the translation's spacing, which no mapping can undo
lattice_positions = st.integers(1, 60).flatmap(
    lambda d: arrays(np.int64, (d, 2), elements=st.integers(-6400, 6400)).map(lambda a: a / 64.0)
)


def greedy_oracle(pos, g):
    """Feature-index-order greedy placement recomputed with plain loops."""
    pos = np.asarray(pos, dtype=np.float64)
    free = [[True] * g for _ in range(g)]
    cells = []
    lo, hi = pos.min(0), pos.max(0)
    for x, y in pos:
        u = [(v - l) / (h - l) if h > l else 0.0 for v, l, h in zip((x, y), lo, hi)]
        col, row = (min(int(np.floor(round(v, 9) * g)), g - 1) for v in u)
        if not free[row][col]:
            row, col = oracle_free_cell((row, col), free)
        free[row][col] = False
        cells.append((row, col))
    return cells


def test_single_feature():
    m = build_mapping(np.array([[3.0, -1.0]]), 28)
    assert m.collision_count == 0 and m.cells.tolist() == [[0, 0]]


def test_full_grid_bijection():
    g = 5
    rr, cc = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
    pos = np.c_[cc.ravel() + 0.5, rr.ravel() + 0.5][::-1]
    m = build_mapping(pos, g)
    assert sorted(map(tuple, m.cells.tolist())) == [(r, c) for r in range(g) for c in range(g)]


def test_collision_moved_to_nearest_free():
    pos = np.array([[0.0, 0.0], [0.0, 0.0], [10.0, 10.0]])
    m = build_mapping(pos, 4)
    assert m.cells.tolist() == [[0, 0], [0, 1], [3, 3]]
    assert m.collision_count == 1


@given(positions, st.integers(2, 9))
def test_mapping_matches_brute_force(pos, g):
    assume(pos.shape[0] <= g * g)
    m = build_mapping(pos, g)
    assert [tuple(c) for c in m.cells.tolist()] == greedy_oracle(pos, g)
    flat = m.cells[:, 0] * g + m.cells[:, 1]
    assert len(set(flat.tolist())) == pos.shape[0]


@given(
    lattice_positions,
    st.floats(0.01, 100),
    st.floats(0.01, 100),
    st.floats(-1e3, 1e3),
    st.floats(-1e3, 1e3),
)
def test_mapping_affine_invariance(pos, sx, sy, tx, ty):
    assume(pos.shape[0] <= 64)
    moved = pos * np.array([sx, sy]) + np.array([tx, ty])
    a, b = build_mapping(pos, 8), build_mapping(moved, 8)
    assert np.array_equal(a.cells, b.cells)


def test_grid_too_small():
    with pytest.raises(GridTooSmallError, match="grid too small for lossless mapping"):
        build_mapping(np.zeros((785, 2)), 28)


def test_minimum_grid():
    assert minimum_grid(784) == 28 and minimum_grid(785) == 29 and minimum_grid(10) == 28


def test_forward_examples(rng):
    m = build_mapping(rng.standard_normal((360, 2)), 28)
    zero = forward_transform(np.zeros(360), m)
    assert not zero.pixels.any()
    assert m.active_mask().sum() == 360
    full = forward_transform(np.ones(360), m)
    assert np.count_nonzero(full.pixels) == 360
    for j in (0, 17, 359):
        e = np.zeros(360)
        e[j] = 1.0
        px = forward_transform(e, m).pixels
        assert np.count_nonzero(px) == 1 and px[tuple(m.cells[j])] == 1.0


def test_forward_rejects_out_of_range(rng):
    m = build_mapping(rng.standard_normal((4, 2)), 28)
    with pytest.raises(ValueError, match="normalize"):
        forward_transform(np.array([0.1, 0.2, 1.5, 0.0]), m)


@given(st.integers(1, 100), st.integers(0, 10_000))
def test_round_trip_exact(d, seed):
    rng = np.random.default_rng(seed)
    m = build_mapping(rng.standard_normal((d, 2)), 28)
    x = rng.uniform(size=(5, d))
    assert np.array_equal(from_images(to_images(x, m), m), x)


def test_inverse_ignores_inactive_cells(rng):
    m = build_mapping(rng.standard_normal((50, 2)), 28)
    x = rng.uniform(size=50)
    img = forward_transform(x, m).pixels
    img[~m.active_mask()] = rng.uniform(size=(~m.active_mask()).sum())
    assert np.array_equal(inverse_transform(ImageSample(img), m), x)


def test_round_trip_with_denormalization(rng):
    lo = rng.uniform(-50, 0, size=30)
    norm = NormalizationParams(lo, lo + rng.uniform(0.5, 80, size=30))
    m = build_mapping(FeatureEmbedding(rng.standard_normal((30, 2)), 0.0), 28, norm)
    raw = norm.min + rng.uniform(size=(100, 30)) * (norm.max - norm.min)
    back = from_images(to_images(norm.apply(raw), m), m, denormalize=True)
    assert np.max(np.abs(back - raw) / (norm.max - norm.min)) <= 1e-9


def test_image_sample_invariants():
    with pytest.raises(ValueError):
        ImageSample(np.full((2, 2), 1.5))
    with pytest.raises(ValueError):
        ImageSample(np.full((2, 3), 0.5))


def test_mapping_rejects_shared_cell():
    with pytest.raises(ValueError, match="injective"):
        PixelMapping(4, np.array([[1, 1], [1, 1]]))


def test_mapping_json_round_trip(tmp_path, rng):
    norm = NormalizationParams(np.zeros(5), np.arange(1.0, 6.0))
    m = build_mapping(rng.standard_normal((5, 2)), 28, norm, [f"f{i}" for i in range(5)])
    m.save(tmp_path / "mapping.json")
    back = PixelMapping.load(tmp_path / "mapping.json")
    assert np.array_equal(back.cells, m.cells)
    assert back.feature_names == m.feature_names
    assert np.array_equal(back.norm.max, norm.max)


def test_quantize_axes():
    cells = quantize_positions(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), 4)
    assert cells.tolist() == [[0, 0], [0, 3], [3, 0]]


def test_clamp_counts():
    out, n = clamp_unit(np.array([-0.5, 0.2, 1.2, 1.0]))
    assert out.tolist() == [0.0, 0.2, 1.0, 1.0] and n == 2


def test_pgm_round_trip(tmp_path, rng):
    px = np.round(rng.uniform(size=(7, 9)) * 255) / 255
    write_pgm(tmp_path / "a.pgm", px)
    raw = (tmp_path / "a.pgm").read_bytes()
    assert raw.startswith(b"P5\n9 7\n255\n")
    np.testing.assert_allclose(read_pgm(tmp_path / "a.pgm"), px, atol=1e-12)


def test_tile_layout():
    canvas = tile_images(np.zeros((3, 2, 2)), ncols=2, pad=1)
    assert canvas.shape == (7, 7)
