"""Quality indices for denoising runs: MPSNR, MSSIM, ERGAS, MSAM.

PSNR/SSIM are band-wise spatial metrics averaged over bands; ERGAS and
MSAM compare spectra.  All of them assume band-normalized data, so the
PSNR/SSIM peak defaults to 1.  SSIM uses the single-scale Gaussian-window
form (11x11, sigma 1.5, K1=0.01, K2=0.03) with valid-region averaging; on
bands too small for the 11-pixel window the window shrinks to the largest
odd size that fits.  MSAM is reported in radians.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from rctv.cube import HsiCube, unfold_casorati

SSIM_WIN_SIZE = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

CSV_COLUMNS = ("mpsnr", "mssim", "ergas", "msam", "wall_ms")


@dataclass
class MetricsReport:
    """All four indices plus per-band breakdowns and timing.

    mpsnr/mssim are exactly the means of the per-band arrays.  Bands whose
    reference mean is zero are excluded from ERGAS; spectra with zero norm
    are excluded from MSAM; both exclusions are reported.
    """

    mpsnr: float
    mssim: float
    ergas: float
    msam: float
    per_band_psnr: list[float]
    per_band_ssim: list[float]
    wall_ms: float
    ergas_excluded_bands: list[int]
    msam_excluded_pixels: int

    def to_json_obj(self) -> dict:
        def enc(x):
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

        return {
            "mpsnr": enc(self.mpsnr),
            "mssim": enc(self.mssim),
            "ergas": enc(self.ergas),
            "msam": enc(self.msam),
            "per_band_psnr": [enc(v) for v in self.per_band_psnr],
            "per_band_ssim": [enc(v) for v in self.per_band_ssim],
            "wall_ms": self.wall_ms,
            "ergas_excluded_bands": self.ergas_excluded_bands,
            "msam_excluded_pixels": self.msam_excluded_pixels,
        }

    def to_csv_row(self) -> str:
        def enc(x):
            return repr(x) if math.isfinite(x) else "inf"

        return ",".join(
            enc(v) for v in (self.mpsnr, self.mssim, self.ergas, self.msam, self.wall_ms)
        )


def _check_same_dims(ref, test):
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {test.shape}")


def psnr_band(ref_band: np.ndarray, test_band: np.ndarray, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE); identical bands give math.inf."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    ref_band = np.asarray(ref_band, dtype=np.float64)
    test_band = np.asarray(test_band, dtype=np.float64)
    _check_same_dims(ref_band, test_band)
    mse = float(np.mean((ref_band - test_band) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def mpsnr(ref: HsiCube, test: HsiCube, peak: float = 1.0) -> float:
    return float(np.mean(per_band_psnr(ref, test, peak)))


def per_band_psnr(ref: HsiCube, test: HsiCube, peak: float = 1.0) -> list[float]:
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {test.shape}")
    return [psnr_band(ref.band(b), test.band(b), peak) for b in range(ref.bands)]


def gaussian_window(win_size: int, sigma: float) -> np.ndarray:
    """1-D Gaussian taps; the separable 2-D window has unit total weight."""
    half = (win_size - 1) / 2.0
    x = np.arange(win_size) - half
    g = np.exp(-(x**2) / (2.0 * sigma * sigma))
    return g / g.sum()


def _correlate_valid(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with the same 1-D taps on both axes."""
    w = taps.size
    out = np.tensordot(sliding_window_view(img, w, axis=0), taps, axes=([2], [0]))
    out = np.tensordot(sliding_window_view(out, w, axis=1), taps, axes=([2], [0]))
    return out


def effective_ssim_window(height: int, width: int) -> int:
    """The 11-pixel default, shrunk to the largest odd size that fits."""
    smallest = min(height, width)
    if smallest < 3:
        raise ValueError(f"band {height}x{width} too small for SSIM")
    win = min(SSIM_WIN_SIZE, smallest)
    if win % 2 == 0:
        win -= 1
    return win


def ssim_band(ref_band: np.ndarray, test_band: np.ndarray, peak: float = 1.0) -> float:
    """Mean local SSIM over the valid window positions of one band."""
    x = np.asarray(ref_band, dtype=np.float64)
    y = np.asarray(test_band, dtype=np.float64)
    _check_same_dims(x, y)
    win = effective_ssim_window(*x.shape)
    taps = gaussian_window(win, SSIM_SIGMA)
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_x = _correlate_valid(x, taps)
    mu_y = _correlate_valid(y, taps)
    var_x = _correlate_valid(x * x, taps) - mu_x * mu_x
    var_y = _correlate_valid(y * y, taps) - mu_y * mu_y
    cov = _correlate_valid(x * y, taps) - mu_x * mu_y
    ssim_map = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return float(ssim_map.mean())


def mssim(ref: HsiCube, test: HsiCube, peak: float = 1.0) -> float:
    return float(np.mean(per_band_ssim(ref, test, peak)))


def per_band_ssim(ref: HsiCube, test: HsiCube, peak: float = 1.0) -> list[float]:
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {test.shape}")
    return [ssim_band(ref.band(b), test.band(b), peak) for b in range(ref.bands)]


def ergas(ref: HsiCube, test: HsiCube) -> float:
    """100 * sqrt(mean_b(RMSE_b^2 / mean_b^2)) over bands with nonzero mean."""
    value, _ = ergas_with_exclusions(ref, test)
    return value


def ergas_with_exclusions(ref: HsiCube, test: HsiCube) -> tuple[float, list[int]]:
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {test.shape}")
    x = unfold_casorati(ref)
    y = unfold_casorati(test)
    means = x.mean(axis=0)
    mse = np.mean((x - y) ** 2, axis=0)
    excluded = np.flatnonzero(means == 0.0)
    included = means != 0.0
    if not included.any():
        raise ValueError("all reference bands have zero mean")
    value = 100.0 * math.sqrt(float(np.mean(mse[included] / means[included] ** 2)))
    return value, [int(b) for b in excluded]


def msam(ref: HsiCube, test: HsiCube) -> float:
    """Mean spectral angle (radians) over pixels with nonzero spectra."""
    value, _ = msam_with_exclusions(ref, test)
    return value


def msam_with_exclusions(ref: HsiCube, test: HsiCube) -> tuple[float, int]:
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {test.shape}")
    x = unfold_casorati(ref)
    y = unfold_casorati(test)
    dots = np.einsum("ij,ij->i", x, y)
    nx = np.linalg.norm(x, axis=1)
    ny = np.linalg.norm(y, axis=1)
    included = (nx > 0) & (ny > 0)
    if not included.any():
        raise ValueError("all pixel spectra have zero norm")
    cos = np.clip(dots[included] / (nx[included] * ny[included]), -1.0, 1.0)
    value = float(np.mean(np.arccos(cos)))
    return value, int((~included).sum())


def column_mean_profile(cube: HsiCube, band: int) -> np.ndarray:
    """Per-column mean of one band; deadline columns show up as dips."""
    return cube.band(band).mean(axis=0)


def compute_report(ref: HsiCube, test: HsiCube, peak: float = 1.0) -> MetricsReport:
    """All four indices plus per-band breakdowns, with wall-clock timing."""
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {test.shape}")
    t0 = time.perf_counter()
    band_psnr = per_band_psnr(ref, test, peak)
    band_ssim = per_band_ssim(ref, test, peak)
    ergas_val, ergas_excl = ergas_with_exclusions(ref, test)
    msam_val, msam_excl = msam_with_exclusions(ref, test)
    wall_ms = (time.perf_counter() - t0) * 1e3
    return MetricsReport(
        mpsnr=float(np.mean(band_psnr)),
        mssim=float(np.mean(band_ssim)),
        ergas=ergas_val,
        msam=msam_val,
        per_band_psnr=band_psnr,
        per_band_ssim=band_ssim,
        wall_ms=wall_ms,
        ergas_excluded_bands=ergas_excl,
        msam_excluded_pixels=msam_excl,
    )
