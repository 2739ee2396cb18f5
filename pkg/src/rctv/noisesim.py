"""Seeded mixed-noise generators for benchmark corruption protocols.

Six composite cases (a)-(f) combine per-band Gaussian noise, salt-and-pepper
impulses, zeroed full-height "deadline" columns, and constant-offset stripe
columns.  Everything is driven by numpy's PCG64 generator: streams are
identical across platforms for a fixed numpy version, each corruption stage
derives its own sub-seed from the master seed, and a NoiseRecord carries
enough information to replay a corruption bit-exactly.

Column and band indices in records are 0-based.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from rctv.cube import HsiCube

SigmaLike = Union[float, tuple[float, float], np.ndarray]

_U64_MASK = (1 << 64) - 1

# Stage tags double as sub-seed entropy so replaying one stage in isolation
# is possible from a record.
_STAGE_CODES = {"gaussian": 1, "impulse": 2, "deadline": 3, "stripe": 4}

CASES = ("a", "b", "c", "d", "e", "f")

_PROFILES = {
    "msi31": {
        "bands": 31,
        "deadline_window": (11, 20),
        "deadline_count": (5, 55),
        "deadline_width": (1, 5),
        "stripe_window": (21, 30),
        "stripe_count": (50, 100),
    },
    "hsi160": {
        "bands": 160,
        "deadline_window": (91, 130),
        "deadline_count": (3, 10),
        "deadline_width": (1, 3),
        "stripe_window": (141, 160),
        "stripe_count": (20, 40),
    },
}


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    """Deterministic per-stage generator derived from the master seed."""
    entropy = [int(seed) & _U64_MASK, _STAGE_CODES[stage]]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class DeadlineSpec:
    """Zeroed-column artifacts over a 0-based inclusive band window."""

    band_lo: int
    band_hi: int
    count_range: tuple[int, int]
    width_range: tuple[int, int]

    def __post_init__(self):
        if self.band_lo < 0 or self.band_hi < self.band_lo:
            raise ValueError("bad deadline band window")
        if self.count_range[1] < self.count_range[0] or self.count_range[0] < 0:
            raise ValueError("bad deadline count range")
        if self.width_range[1] < self.width_range[0] or self.width_range[0] < 1:
            raise ValueError("bad deadline width range")


@dataclass(frozen=True)
class StripeSpec:
    """Constant column offsets over a 0-based inclusive band window."""

    band_lo: int
    band_hi: int
    count_range: tuple[int, int]
    offset_range: tuple[float, float] = (-0.25, 0.25)
    clamp: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.band_lo < 0 or self.band_hi < self.band_lo:
            raise ValueError("bad stripe band window")
        if self.count_range[1] < self.count_range[0] or self.count_range[0] < 0:
            raise ValueError("bad stripe count range")
        if self.offset_range[1] < self.offset_range[0]:
            raise ValueError("bad stripe offset range")


@dataclass(frozen=True)
class NoiseSpec:
    """Declarative description of one composite corruption.

    gaussian_sigma / impulse_ratio may be a scalar (same for all bands) or
    a (lo, hi) pair (one value drawn per band), or None to skip the stage.
    """

    gaussian_sigma: Optional[SigmaLike] = None
    impulse_ratio: Optional[SigmaLike] = None
    deadline: Optional[DeadlineSpec] = None
    stripes: Optional[StripeSpec] = None
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        def pair(x):
            return tuple(x) if isinstance(x, (list, tuple)) else x

        deadline = d.get("deadline")
        stripes = d.get("stripes")
        return cls(
            gaussian_sigma=pair(d.get("gaussian_sigma")),
            impulse_ratio=pair(d.get("impulse_ratio")),
            deadline=DeadlineSpec(
                band_lo=deadline["band_lo"],
                band_hi=deadline["band_hi"],
                count_range=tuple(deadline["count_range"]),
                width_range=tuple(deadline["width_range"]),
            )
            if deadline
            else None,
            stripes=StripeSpec(
                band_lo=stripes["band_lo"],
                band_hi=stripes["band_hi"],
                count_range=tuple(stripes["count_range"]),
                offset_range=tuple(stripes["offset_range"]),
                clamp=tuple(stripes["clamp"]) if stripes.get("clamp") else None,
            )
            if stripes
            else None,
            seed=d.get("seed", 0),
        )


@dataclass
class NoiseRecord:
    """Realized corruption parameters plus everything needed to replay."""

    seed: int
    case: Optional[str]
    profile: Optional[str]
    windows_rescaled: bool
    gaussian_sigma: Optional[list[float]]
    impulse_ratio: Optional[list[float]]
    impulse_count: Optional[list[int]]
    deadlines: Optional[dict[int, list[tuple[int, int]]]]
    stripes: Optional[dict[int, list[tuple[int, float]]]]
    stage_entropy: dict[str, list[int]]
    spec: dict

    def to_json_obj(self) -> dict:
        obj = asdict(self)
        # JSON object keys must be strings.
        for key in ("deadlines", "stripes"):
            if obj[key] is not None:
                obj[key] = {str(b): v for b, v in obj[key].items()}
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "NoiseRecord":
        deadlines = obj.get("deadlines")
        if deadlines is not None:
            deadlines = {
                int(b): [(int(c), int(w)) for c, w in v] for b, v in deadlines.items()
            }
        stripes = obj.get("stripes")
        if stripes is not None:
            stripes = {
                int(b): [(int(c), float(o)) for c, o in v] for b, v in stripes.items()
            }
        return cls(
            seed=obj["seed"],
            case=obj.get("case"),
            profile=obj.get("profile"),
            windows_rescaled=obj.get("windows_rescaled", False),
            gaussian_sigma=obj.get("gaussian_sigma"),
            impulse_ratio=obj.get("impulse_ratio"),
            impulse_count=obj.get("impulse_count"),
            deadlines=deadlines,
            stripes=stripes,
            stage_entropy=obj.get("stage_entropy", {}),
            spec=obj["spec"],
        )


def _per_band_values(param: SigmaLike, bands: int, rng: np.random.Generator):
    """Resolve a scalar / range / per-band parameter to one value per band.

    A tuple or list is a (lo, hi) range: one value per band is drawn up
    front with a single uniform call, so the downstream noise stream does
    not depend on how the values were specified.  An ndarray is taken as
    explicit per-band values.
    """
    if isinstance(param, (tuple, list)):
        lo, hi = param
        if hi < lo:
            raise ValueError(f"range not well-ordered: {param}")
        return rng.uniform(lo, hi, bands)
    arr = np.asarray(param, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(bands, float(arr))
    if arr.shape != (bands,):
        raise ValueError(f"expected {bands} per-band values, got shape {arr.shape}")
    return arr


def add_gaussian(
    cube: HsiCube, sigma: SigmaLike, rng: np.random.Generator
) -> tuple[HsiCube, np.ndarray]:
    """Add zero-mean Gaussian noise with one standard deviation per band.

    Returns the corrupted cube and the realized per-band sigmas.
    """
    sigmas = _per_band_values(sigma, cube.bands, rng)
    if np.any(sigmas < 0):
        raise ValueError("gaussian sigma must be >= 0")
    mn = cube.height * cube.width
    noise = rng.standard_normal((cube.bands, mn)) * sigmas[:, None]
    data = cube.data.reshape(cube.bands, mn) + noise
    return HsiCube(cube.height, cube.width, cube.bands, data.ravel()), sigmas


def add_impulse(
    cube: HsiCube, ratio: SigmaLike, rng: np.random.Generator
) -> tuple[HsiCube, np.ndarray, np.ndarray]:
    """Salt-and-pepper corruption of exactly floor(ratio * M * N) entries per band.

    Corrupted entries are chosen uniformly without replacement and set to 0
    or 1 with equal probability; everything else is untouched bit-for-bit.
    Returns (cube, per-band ratios, per-band corrupted counts).
    """
    ratios = _per_band_values(ratio, cube.bands, rng)
    if np.any((ratios < 0) | (ratios > 1)):
        raise ValueError("impulse ratio must lie in [0, 1]")
    mn = cube.height * cube.width
    data = cube.data.copy()
    counts = np.floor(ratios * mn).astype(np.int64)
    for b in range(cube.bands):
        count = int(counts[b])
        if count == 0:
            continue
        idx = rng.choice(mn, size=count, replace=False)
        vals = rng.integers(0, 2, size=count).astype(np.float64)
        data[b * mn + idx] = vals
    return HsiCube(cube.height, cube.width, cube.bands, data), ratios, counts


def add_deadlines(
    cube: HsiCube, spec: DeadlineSpec, rng: np.random.Generator
) -> tuple[HsiCube, dict[int, list[tuple[int, int]]]]:
    """Zero out random non-overlapping column runs in the window bands.

    Per band, a run count is drawn from count_range, then each run gets a
    width from width_range and a uniformly random starting column among the
    positions that keep runs disjoint; placement stops early if nothing
    fits.  Returns (cube, {band: [(start_col, width), ...]}).
    """
    m, n = cube.height, cube.width
    if spec.width_range[1] > n:
        raise ValueError(
            f"deadline width up to {spec.width_range[1]} exceeds width {n}"
        )
    mn = m * n
    data = cube.data.copy()
    placements: dict[int, list[tuple[int, int]]] = {}
    band_hi = min(spec.band_hi, cube.bands - 1)
    for b in range(spec.band_lo, band_hi + 1):
        count = int(rng.integers(spec.count_range[0], spec.count_range[1], endpoint=True))
        occupied = np.zeros(n, dtype=bool)
        placed: list[tuple[int, int]] = []
        for _ in range(count):
            width = int(
                rng.integers(spec.width_range[0], spec.width_range[1], endpoint=True)
            )
            free = np.flatnonzero(
                [not occupied[p : p + width].any() for p in range(n - width + 1)]
            )
            if free.size == 0:
                break
            start = int(free[rng.integers(free.size)])
            occupied[start : start + width] = True
            for j in range(start, start + width):
                data[b * mn + j * m : b * mn + (j + 1) * m] = 0.0
            placed.append((start, width))
        placements[b] = placed
    return HsiCube(m, n, cube.bands, data), placements


def add_stripes(
    cube: HsiCube, spec: StripeSpec, rng: np.random.Generator
) -> tuple[HsiCube, dict[int, list[tuple[int, float]]]]:
    """Add a constant offset to randomly chosen columns of the window bands.

    Per band, a stripe count is drawn from count_range (capped at the image
    width), distinct columns are sampled without replacement, and each gets
    an offset drawn uniformly from offset_range.  With clamp set, the
    struck columns are clipped into that range afterwards.
    Returns (cube, {band: [(col, offset), ...]}).
    """
    m, n = cube.height, cube.width
    mn = m * n
    data = cube.data.copy()
    placements: dict[int, list[tuple[int, float]]] = {}
    band_hi = min(spec.band_hi, cube.bands - 1)
    for b in range(spec.band_lo, band_hi + 1):
        count = int(rng.integers(spec.count_range[0], spec.count_range[1], endpoint=True))
        count = min(count, n)
        cols = rng.choice(n, size=count, replace=False)
        offsets = rng.uniform(spec.offset_range[0], spec.offset_range[1], size=count)
        placed = []
        for col, off in zip(cols, offsets):
            col = int(col)
            sl = slice(b * mn + col * m, b * mn + (col + 1) * m)
            data[sl] += off
            if spec.clamp is not None:
                np.clip(data[sl], spec.clamp[0], spec.clamp[1], out=data[sl])
            placed.append((col, float(off)))
        placements[b] = placed
    return HsiCube(m, n, cube.bands, data), placements


def _rescale_window(window: tuple[int, int], bands_ref: int, bands: int) -> tuple[int, int]:
    """Proportionally map a 1-based band window onto a different band count."""
    lo = max(1, round(window[0] * bands / bands_ref))
    hi = min(bands, round(window[1] * bands / bands_ref))
    hi = max(hi, lo)
    return lo, hi


def case_spec(
    case_id: str, profile: str, bands: int, seed: int
) -> tuple[NoiseSpec, bool]:
    """Build the NoiseSpec for one of the cases (a)-(f) under a profile.

    Profile band windows assume the profile's native band count; other
    counts get proportionally rescaled windows and the fact is flagged.
    """
    if case_id not in CASES:
        raise ValueError(f"unknown case {case_id!r}; choose from {CASES}")
    if profile not in _PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(_PROFILES)}")
    prof = _PROFILES[profile]
    rescaled = bands != prof["bands"]

    def window(key):
        lo, hi = prof[key]
        if rescaled:
            lo, hi = _rescale_window((lo, hi), prof["bands"], bands)
        # 1-based inclusive -> 0-based inclusive
        return lo - 1, hi - 1

    deadline = None
    if case_id in ("b", "d", "e", "f"):
        lo, hi = window("deadline_window")
        deadline = DeadlineSpec(
            band_lo=lo,
            band_hi=hi,
            count_range=prof["deadline_count"],
            width_range=prof["deadline_width"],
        )
    stripes = None
    if case_id == "f":
        lo, hi = window("stripe_window")
        stripes = StripeSpec(
            band_lo=lo, band_hi=hi, count_range=prof["stripe_count"]
        )

    gaussian: SigmaLike
    impulse: Optional[SigmaLike]
    if case_id in ("a", "b"):
        gaussian, impulse = 0.1, None
    elif case_id in ("c", "d"):
        gaussian, impulse = 0.075, 0.1
    else:  # e, f
        gaussian, impulse = (0.05, 0.15), (0.05, 0.15)

    spec = NoiseSpec(
        gaussian_sigma=gaussian,
        impulse_ratio=impulse,
        deadline=deadline,
        stripes=stripes,
        seed=seed,
    )
    return spec, rescaled


def apply_spec(cube: HsiCube, spec: NoiseSpec) -> tuple[HsiCube, NoiseRecord]:
    """Execute a NoiseSpec: Gaussian, then impulse, then deadlines, then stripes.

    Each stage runs from its own sub-seeded generator, so dropping or
    adding trailing stages never perturbs the earlier ones.
    """
    record = NoiseRecord(
        seed=spec.seed,
        case=None,
        profile=None,
        windows_rescaled=False,
        gaussian_sigma=None,
        impulse_ratio=None,
        impulse_count=None,
        deadlines=None,
        stripes=None,
        stage_entropy={},
        spec=spec.to_dict(),
    )
    out = cube
    if spec.gaussian_sigma is not None:
        rng = stage_rng(spec.seed, "gaussian")
        record.stage_entropy["gaussian"] = [spec.seed & _U64_MASK, _STAGE_CODES["gaussian"]]
        out, sigmas = add_gaussian(out, spec.gaussian_sigma, rng)
        record.gaussian_sigma = [float(s) for s in sigmas]
    if spec.impulse_ratio is not None:
        rng = stage_rng(spec.seed, "impulse")
        record.stage_entropy["impulse"] = [spec.seed & _U64_MASK, _STAGE_CODES["impulse"]]
        out, ratios, counts = add_impulse(out, spec.impulse_ratio, rng)
        record.impulse_ratio = [float(r) for r in ratios]
        record.impulse_count = [int(c) for c in counts]
    if spec.deadline is not None:
        rng = stage_rng(spec.seed, "deadline")
        record.stage_entropy["deadline"] = [spec.seed & _U64_MASK, _STAGE_CODES["deadline"]]
        out, placements = add_deadlines(out, spec.deadline, rng)
        record.deadlines = placements
    if spec.stripes is not None:
        rng = stage_rng(spec.seed, "stripe")
        record.stage_entropy["stripe"] = [spec.seed & _U64_MASK, _STAGE_CODES["stripe"]]
        out, placements = add_stripes(out, spec.stripes, rng)
        record.stripes = placements
    return out, record


def apply_case(
    cube: HsiCube, case_id: str, profile: str, seed: int
) -> tuple[HsiCube, NoiseRecord]:
    """Corrupt a cube per one of the named cases (a)-(f)."""
    spec, rescaled = case_spec(case_id, profile, cube.bands, seed)
    out, record = apply_spec(cube, spec)
    record.case = case_id
    record.profile = profile
    record.windows_rescaled = rescaled
    return out, record


def replay(record: NoiseRecord, clean: HsiCube) -> HsiCube:
    """Re-run the corruption described by a record; bit-exact by construction."""
    spec = NoiseSpec.from_dict(record.spec)
    out, _ = apply_spec(clean, spec)
    return out
