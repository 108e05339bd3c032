"""Raw planar YUV 4:2:0 (I420) ingestion and the macroblock grid."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

MB_SIZE = 16


class ConfigurationError(ValueError):
    """Invalid video geometry or run configuration."""


class IngestionError(IOError):
    """Input file does not hold the frames it was declared to hold."""


@dataclass(frozen=True)
class VideoSpec:
    width: int
    height: int
    frame_rate: float = 15.0
    frame_count: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigurationError(f"dimensions must be positive, got {self.width}x{self.height}")
        if self.width % MB_SIZE or self.height % MB_SIZE:
            raise ConfigurationError(
                f"dimensions must be multiples of {MB_SIZE}, got {self.width}x{self.height}"
            )
        if self.frame_rate <= 0:
            raise ConfigurationError(f"frame_rate must be > 0, got {self.frame_rate}")
        if self.frame_count < 0:
            raise ConfigurationError(f"frame_count must be >= 0, got {self.frame_count}")

    @property
    def frame_bytes(self) -> int:
        return self.width * self.height * 3 // 2

    @property
    def grid(self) -> "MbGrid":
        return MbGrid(self.width // MB_SIZE, self.height // MB_SIZE)


@dataclass(frozen=True)
class MbGrid:
    mbs_x: int
    mbs_y: int

    @property
    def mb_count(self) -> int:
        return self.mbs_x * self.mbs_y

    @classmethod
    def for_shape(cls, shape) -> "MbGrid":
        h, w = shape
        return cls(w // MB_SIZE, h // MB_SIZE)

    def origin(self, p: int) -> tuple[int, int]:
        """(row, col) of the top-left pixel of MB ``p``."""
        if not 0 <= p < self.mb_count:
            raise IndexError(f"MB index {p} out of range [0, {self.mb_count})")
        return MB_SIZE * (p // self.mbs_x), MB_SIZE * (p % self.mbs_x)


@dataclass(frozen=True)
class FrameY:
    index: int
    luma: np.ndarray

    def __post_init__(self):
        if self.luma.ndim != 2:
            raise ConfigurationError("luma plane must be 2-D")
        self.luma.setflags(write=False)

    @property
    def shape(self):
        return self.luma.shape

    @property
    def grid(self) -> MbGrid:
        return MbGrid.for_shape(self.luma.shape)


def load_sequence(path, spec: VideoSpec, frame_skip: int = 0) -> list[FrameY]:
    """Read ``spec.frame_count`` frames and keep every ``frame_skip+1``-th luma plane.

    A ``frame_count`` of 0 means "as many whole frames as the file holds".
    Frame indices in the returned list are the source frame numbers.
    """
    if frame_skip < 0:
        raise ConfigurationError(f"frame_skip must be >= 0, got {frame_skip}")
    size = os.path.getsize(path)
    fb = spec.frame_bytes
    count = spec.frame_count if spec.frame_count else size // fb
    expected = count * fb
    if count == 0 or size < expected:
        raise IngestionError(
            f"{path}: expected at least {max(expected, fb)} bytes for "
            f"{max(count, 1)} frame(s) of {spec.width}x{spec.height}, got {size}"
        )
    ysize = spec.width * spec.height
    frames = []
    with open(path, "rb") as fh:
        for k in range(0, count, frame_skip + 1):
            fh.seek(k * fb)
            buf = fh.read(ysize)
            luma = np.frombuffer(buf, dtype=np.uint8).reshape(spec.height, spec.width).copy()
            frames.append(FrameY(k, luma))
    return frames


def write_sequence(path, planes, chroma_value: int = 128) -> None:
    """Write luma planes as I420 with flat chroma."""
    with open(path, "wb") as fh:
        for plane in planes:
            plane = np.asarray(plane, dtype=np.uint8)
            h, w = plane.shape
            fh.write(plane.tobytes())
            fh.write(np.full(h * w // 2, chroma_value, dtype=np.uint8).tobytes())


def mb_pixels(frame: FrameY, p: int) -> np.ndarray:
    """The 16x16 luma block of MB ``p`` (raster MB order)."""
    r, c = frame.grid.origin(p)
    return frame.luma[r:r + MB_SIZE, c:c + MB_SIZE]


def mb_blocks(plane: np.ndarray) -> np.ndarray:
    """View a plane as (mbs_y, mbs_x, 16, 16)."""
    h, w = plane.shape
    return plane.reshape(h // MB_SIZE, MB_SIZE, w // MB_SIZE, MB_SIZE).swapaxes(1, 2)


def mb_means(plane: np.ndarray) -> np.ndarray:
    """Per-MB mean of a plane, flattened in raster MB order."""
    return mb_blocks(plane).mean(axis=(2, 3)).ravel()
