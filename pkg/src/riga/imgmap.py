"""Lossless feature-to-pixel mapping and the forward/inverse image transforms."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import NormalizationParams
from .embed import FeatureEmbedding


class GridTooSmallError(ValueError):
    pass


@dataclass(frozen=True)
class PixelMapping:
    grid_size: int
    cells: np.ndarray  # d x 2 of (row, col)
    collision_count: int = 0
    norm: NormalizationParams | None = None
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, 2)
        g = int(self.grid_size)
        if cells.size and (cells.min() < 0 or cells.max() >= g):
            raise ValueError("cell outside grid")
        flat = cells[:, 0] * g + cells[:, 1]
        if np.unique(flat).size != flat.size:
            raise ValueError("cell assignment is not injective")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "grid_size", g)

    @property
    def n_features(self) -> int:
        return self.cells.shape[0]

    @property
    def flat_index(self) -> np.ndarray:
        return self.cells[:, 0] * self.grid_size + self.cells[:, 1]

    def active_mask(self) -> np.ndarray:
        mask = np.zeros((self.grid_size, self.grid_size), dtype=bool)
        mask[self.cells[:, 0], self.cells[:, 1]] = True
        return mask

    def to_json(self) -> dict:
        names = self.feature_names or tuple(f"f{j}" for j in range(self.n_features))
        out = {
            "grid_size": self.grid_size,
            "cells": [[n, int(r), int(c)] for n, (r, c) in zip(names, self.cells)],
            "collision_count": int(self.collision_count),
        }
        if self.norm is not None:
            out["norm"] = self.norm.to_dict()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PixelMapping":
        norm = NormalizationParams.from_dict(obj["norm"]) if "norm" in obj else None
        names = tuple(c[0] for c in obj["cells"])
        cells = np.array([[c[1], c[2]] for c in obj["cells"]], dtype=np.int64).reshape(-1, 2)
        return cls(obj["grid_size"], cells, obj["collision_count"], norm, names)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "PixelMapping":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class ImageSample:
    pixels: np.ndarray
    label: int = 0
    synthetic: bool = False

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] != px.shape[1]:
            raise ValueError("pixels must be a square grid")
        if not np.isfinite(px).all():
            raise ValueError("non-finite pixel intensity")
        if px.min(initial=0.0) < 0.0 or px.max(initial=0.0) > 1.0:
            raise ValueError("pixel intensities must lie in [0, 1]")
        self.pixels = px


def quantize_positions(positions: np.ndarray, grid_size: int) -> np.ndarray:
    """Per-axis min-max scale to [0, 1] and floor into ``grid_size`` bins.

    x runs along columns and y along rows. The scaled coordinates are
    rounded to 1e-9 before flooring so positive affine rescalings of the
    embedding land in the same cells.
    """
    pos = np.asarray(positions, dtype=np.float64)
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    span = hi - lo
    unit = np.where(span > 0, (pos - lo) / np.where(span > 0, span, 1.0), 0.0)
    unit = np.round(unit, 9)
    idx = np.minimum(np.floor(unit * grid_size).astype(np.int64), grid_size - 1)
    return np.stack([idx[:, 1], idx[:, 0]], axis=1)


def nearest_free_cell(target, free: np.ndarray) -> tuple[int, int]:
    """Closest free cell to ``target`` by center distance; ties by (row, col)."""
    rr, cc = np.nonzero(free)
    d2 = (rr - target[0]) ** 2 + (cc - target[1]) ** 2
    # nonzero() yields row-major order, so argmin's first hit is the lexicographic tie-break
    k = int(np.argmin(d2))
    return int(rr[k]), int(cc[k])


def build_mapping(
    embedding: FeatureEmbedding | np.ndarray,
    grid_size: int = 28,
    norm: NormalizationParams | None = None,
    feature_names=None,
) -> PixelMapping:
    positions = embedding.positions if isinstance(embedding, FeatureEmbedding) else np.asarray(embedding)
    d = positions.shape[0]
    if d > grid_size * grid_size:
        raise GridTooSmallError(
            f"grid too small for lossless mapping: {d} features > {grid_size}x{grid_size} cells"
        )
    wanted = quantize_positions(positions, grid_size)
    free = np.ones((grid_size, grid_size), dtype=bool)
    cells = np.empty_like(wanted)
    collisions = 0
    for j, (r, c) in enumerate(wanted):
        if free[r, c]:
            cells[j] = (r, c)
        else:
            cells[j] = nearest_free_cell((r, c), free)
            collisions += 1
        free[cells[j, 0], cells[j, 1]] = False
    names = tuple(feature_names) if feature_names is not None else None
    return PixelMapping(grid_size, cells, collisions, norm, names)


def minimum_grid(d: int, preferred: int = 28) -> int:
    return max(preferred, int(np.ceil(np.sqrt(d))))


def to_images(rows, mapping: PixelMapping) -> np.ndarray:
    """Batch forward transform: (N x d) in [0, 1] to (N x g x g)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != mapping.n_features:
        raise ValueError(f"row length {rows.shape[1]} != mapping size {mapping.n_features}")
    if not np.isfinite(rows).all() or rows.min(initial=0.0) < 0.0 or rows.max(initial=0.0) > 1.0:
        raise ValueError("row values must be finite and in [0, 1]; normalize first")
    g = mapping.grid_size
    out = np.zeros((rows.shape[0], g * g))
    out[:, mapping.flat_index] = rows
    return out.reshape(-1, g, g)


def from_images(images, mapping: PixelMapping, denormalize: bool = False) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    g = mapping.grid_size
    if images.shape[-2:] != (g, g):
        raise ValueError(f"image grid {images.shape[-2:]} does not match mapping grid {g}")
    rows = images.reshape(-1, g * g)[:, mapping.flat_index]
    if denormalize:
        if mapping.norm is None:
            raise ValueError("mapping carries no normalization parameters")
        rows = mapping.norm.invert(rows)
    return rows


def forward_transform(row, mapping: PixelMapping, label: int = 0) -> ImageSample:
    row = np.asarray(row, dtype=np.float64).reshape(-1)
    return ImageSample(to_images(row[None, :], mapping)[0], label, False)


def inverse_transform(image, mapping: PixelMapping, denormalize: bool = False) -> np.ndarray:
    pixels = image.pixels if isinstance(image, ImageSample) else image
    return from_images(np.asarray(pixels)[None], mapping, denormalize)[0]


def clamp_unit(images) -> tuple[np.ndarray, int]:
    """Clamp to [0, 1]; also report how many values were out of range."""
    images = np.asarray(images, dtype=np.float64)
    out_of_range = int(np.count_nonzero((images < 0.0) | (images > 1.0)))
    return np.clip(images, 0.0, 1.0), out_of_range


def write_pgm(path, pixels) -> None:
    """Binary PGM (P5, maxval 255)."""
    px = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    data = np.round(px * 255.0).astype(np.uint8)
    h, w = data.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while raw[pos : pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.frombuffer(raw[pos + 1 : pos + 1 + w * h], dtype=np.uint8)
    return data.reshape(h, w).astype(np.float64) / maxval


def tile_images(images, ncols: int, pad: int = 1) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    n, h, w = images.shape
    nrows = max(1, -(-n // ncols))
    canvas = np.ones((nrows * (h + pad) + pad, ncols * (w + pad) + pad))
    for i in range(n):
        r, c = divmod(i, ncols)
        y, x = pad + r * (h + pad), pad + c * (w + pad)
        canvas[y : y + h, x : x + w] = images[i]
    return canvas
