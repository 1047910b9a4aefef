"""Grid geometry and PGM image I/O.

Cells are addressed ``(row, col)``: ``row`` indexes y, ``col`` indexes x,
and arrays are stored row-major with shape ``(height, width)``. Image row 0
is grid row 0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

Cell = tuple[int, int]


@dataclass(frozen=True)
class GridSpec:
    origin_x: float
    origin_y: float
    resolution: float
    width: int
    height: int

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def cell_of(self, x: float, y: float) -> Cell:
        return (
            int(math.floor((y - self.origin_y) / self.resolution)),
            int(math.floor((x - self.origin_x) / self.resolution)),
        )

    def center(self, cell: Cell) -> tuple[float, float]:
        r, c = cell
        return (
            self.origin_x + (c + 0.5) * self.resolution,
            self.origin_y + (r + 0.5) * self.resolution,
        )

    def centers(self, cells) -> np.ndarray:
        cells = np.asarray(cells, dtype=float).reshape(-1, 2)
        return np.column_stack(
            [
                self.origin_x + (cells[:, 1] + 0.5) * self.resolution,
                self.origin_y + (cells[:, 0] + 0.5) * self.resolution,
            ]
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            origin_x=float(d["origin_x"]),
            origin_y=float(d["origin_y"]),
            resolution=float(d["resolution"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )

    @classmethod
    def covering(cls, xmin, ymin, xmax, ymax, resolution: float, margin: float = 0.0) -> "GridSpec":
        xmin, ymin = xmin - margin, ymin - margin
        width = max(1, int(math.floor((xmax + margin - xmin) / resolution)) + 1)
        height = max(1, int(math.floor((ymax + margin - ymin) / resolution)) + 1)
        return cls(xmin, ymin, resolution, width, height)


class PGMError(ValueError):
    pass


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Binary PGM (P5). ``uint8`` images get maxval 255, ``uint16`` get 65535."""
    image = np.asarray(image)
    if image.dtype == np.uint8:
        maxval, data = 255, image.tobytes()
    elif image.dtype == np.uint16:
        maxval, data = 65535, image.astype(">u2").tobytes()
    else:
        raise PGMError(f"unsupported dtype {image.dtype}")
    h, w = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        f.write(data)


def _tokens(buf: bytes, n: int) -> tuple[list[bytes], int]:
    tokens, pos = [], 0
    while len(tokens) < n:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PGMError("truncated PGM header")
        tokens.append(buf[start:pos])
    return tokens, pos + 1  # exactly one whitespace byte follows maxval


def read_pgm(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    (magic, w, h, maxval), offset = _tokens(buf, 4)
    if magic != b"P5":
        raise PGMError(f"{path}: not a binary PGM")
    w, h, maxval = int(w), int(h), int(maxval)
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    data = np.frombuffer(buf, dtype=dtype, count=w * h, offset=offset)
    return data.reshape(h, w).astype(np.uint8 if maxval < 256 else np.uint16)
