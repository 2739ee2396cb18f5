"""Hyperspectral cube data model and I/O.

A cube is an M x N x B volume stored band-sequentially: band b occupies one
contiguous M x N plane, column-major inside the plane, so that the Casorati
row index of pixel (i, j) is k = (j - 1) * M + i in 1-based terms
(k = j * M + i zero-based).  Column b of the Casorati matrix is the
vectorized band b; row k is the spectrum of one pixel.

All in-memory arithmetic is float64.  The native ".hsic" file format stores
a one-line JSON header followed by the raw payload as little-endian float32
in the same band-sequential, column-major order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

HSIC_MAGIC = "HSIC1"
HSIC_DTYPE = "f32le"
HSIC_LAYOUT = "bsq-colmajor"

# Guard against absurd headers before allocating the payload buffer.
MAX_ELEMENTS = 2**31


class CubeFormatError(ValueError):
    """Raised when an .hsic stream has a bad header or payload."""


@dataclass(frozen=True, eq=False)
class HsiCube:
    """Immutable M x N x B cube with band-sequential float64 storage."""

    height: int
    width: int
    bands: int
    data: np.ndarray

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.bands < 1:
            raise ValueError(
                f"cube dims must be positive, got "
                f"{self.height}x{self.width}x{self.bands}"
            )
        n = self.height * self.width * self.bands
        data = np.asarray(self.data, dtype=np.float64).reshape(-1)
        if data.size != n:
            raise ValueError(f"data length {data.size} != M*N*B = {n}")
        if not np.all(np.isfinite(data)):
            raise ValueError("cube contains non-finite values")
        data = np.ascontiguousarray(data)
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.height, self.width, self.bands)

    def band(self, b: int) -> np.ndarray:
        """Band b (0-based) as a read-only (M, N) plane view."""
        if not 0 <= b < self.bands:
            raise IndexError(f"band {b} out of range [0, {self.bands})")
        mn = self.height * self.width
        plane = self.data[b * mn : (b + 1) * mn]
        return plane.reshape((self.height, self.width), order="F")

    def to_array(self) -> np.ndarray:
        """Copy out as an (M, N, B) array indexed [i, j, b]."""
        return np.stack([self.band(b) for b in range(self.bands)], axis=2)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "HsiCube":
        """Build from an (M, N, B) array indexed [i, j, b]."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"expected a 3-d array, got ndim={arr.ndim}")
        m, n, b = arr.shape
        # [b, j, i] raveled C-order = band-major, column-major planes.
        data = arr.transpose(2, 1, 0).reshape(-1)
        return cls(m, n, b, data)


@dataclass(frozen=True)
class NormalizationRecord:
    """Per-band (min, max) pairs captured by normalize_bands.

    Bands with max == min are flagged constant; they normalize to zero and
    denormalize back to the recorded min.
    """

    mins: np.ndarray
    maxs: np.ndarray
    constant: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=np.float64)
        maxs = np.asarray(self.maxs, dtype=np.float64)
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ValueError("mins/maxs must be 1-d arrays of equal length")
        if np.any(maxs < mins):
            raise ValueError("band max < band min")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)
        object.__setattr__(self, "constant", np.asarray(self.constant, dtype=bool))


def unfold_casorati(cube: HsiCube) -> np.ndarray:
    """Unfold to the (M*N, B) Casorati matrix.

    Column b is the vectorized band b; row k = j*M + i (0-based) is the
    spectrum of pixel (i, j).
    """
    mn = cube.height * cube.width
    return cube.data.reshape(cube.bands, mn).T.copy()


def fold_casorati(mat: np.ndarray, height: int, width: int) -> HsiCube:
    """Inverse of unfold_casorati for an (M*N, B) matrix."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={mat.ndim}")
    if mat.shape[0] != height * width:
        raise ValueError(
            f"row count {mat.shape[0]} != M*N = {height * width}"
        )
    data = np.ascontiguousarray(mat.T).reshape(-1)
    return HsiCube(height, width, mat.shape[1], data)


def normalize_bands(cube: HsiCube) -> tuple[HsiCube, NormalizationRecord]:
    """Min-max rescale each band to [0, 1].

    Constant bands map to all-zeros and are flagged rather than raising;
    real cubes contain dead bands and the solver must not abort on them.
    """
    x = unfold_casorati(cube)
    mins = x.min(axis=0)
    maxs = x.max(axis=0)
    constant = maxs == mins
    span = np.where(constant, 1.0, maxs - mins)
    y = (x - mins) / span
    y[:, constant] = 0.0
    rec = NormalizationRecord(mins=mins, maxs=maxs, constant=constant)
    return fold_casorati(y, cube.height, cube.width), rec


def denormalize_bands(cube: HsiCube, rec: NormalizationRecord) -> HsiCube:
    """Invert normalize_bands; constant bands restore to their recorded min."""
    if rec.mins.size != cube.bands:
        raise ValueError(
            f"record has {rec.mins.size} bands, cube has {cube.bands}"
        )
    x = unfold_casorati(cube)
    span = np.where(rec.constant, 0.0, rec.maxs - rec.mins)
    y = x * span + rec.mins
    return fold_casorati(y, cube.height, cube.width)


def write_cube(cube: HsiCube, path) -> None:
    """Write the native .hsic format (JSON header line + f32le payload)."""
    header = {
        "magic": HSIC_MAGIC,
        "height": cube.height,
        "width": cube.width,
        "bands": cube.bands,
        "dtype": HSIC_DTYPE,
        "layout": HSIC_LAYOUT,
    }
    with open(path, "wb") as fp:
        fp.write(json.dumps(header).encode("utf-8"))
        fp.write(b"\n")
        fp.write(cube.data.astype("<f4").tobytes())


def read_cube(path) -> HsiCube:
    """Read the native .hsic format written by write_cube."""
    with open(path, "rb") as fp:
        header_line = fp.readline()
        if not header_line.endswith(b"\n"):
            raise CubeFormatError("missing header line terminator")
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CubeFormatError(f"malformed header: {exc}") from exc
        if not isinstance(header, dict):
            raise CubeFormatError("header is not a JSON object")
        if header.get("magic") != HSIC_MAGIC:
            raise CubeFormatError(f"bad magic {header.get('magic')!r}")
        if header.get("dtype") != HSIC_DTYPE:
            raise CubeFormatError(f"unsupported dtype {header.get('dtype')!r}")
        if header.get("layout") != HSIC_LAYOUT:
            raise CubeFormatError(f"unsupported layout {header.get('layout')!r}")
        try:
            m = int(header["height"])
            n = int(header["width"])
            b = int(header["bands"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CubeFormatError(f"bad dimension fields: {exc}") from exc
        if m < 1 or n < 1 or b < 1:
            raise CubeFormatError(f"invalid dimensions {m}x{n}x{b}")
        count = m * n * b
        if count > MAX_ELEMENTS:
            raise CubeFormatError(f"dimension overflow: {m}x{n}x{b}")
        payload = fp.read(4 * count)
        if len(payload) < 4 * count:
            raise CubeFormatError(
                f"truncated payload: expected {4 * count} bytes, "
                f"got {len(payload)}"
            )
        if fp.read(1):
            raise CubeFormatError("trailing bytes after payload")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return HsiCube(m, n, b, data)


def write_band_csv(cube: HsiCube, band: int, path) -> None:
    """Dump one band as an M-row, N-column CSV grid for inspection."""
    np.savetxt(path, cube.band(band), delimiter=",", fmt="%.17g")
