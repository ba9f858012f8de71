"""Virtual FPGA fabric with per-slice ring-oscillator frequency populations.

A synthesized chip carries one nominal (reference-condition) frequency per
slice site, composed of a family-wide base, a routing-class offset, a planar
systematic gradient and a per-device random component.  Environmental
response is affine in temperature and relative supply voltage.  Measurement
produces integer pulse counts over a fixed enable window.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Mapping, Optional

import numpy as np

KHZ_TO_MHZ = 1e-3

REFERENCE_TEMP_C = 35.0
REFERENCE_VCC_MV = 1000.0

DEFAULT_T_ON_US = 122.87
DEFAULT_SAMPLES = 32


class ConfigError(ValueError):
    """Raised for an invalid device specification or config file."""


class DataError(ValueError):
    """Raised for inconsistent ingested measurement data."""


class SliceClass(Enum):
    """Routing-delay class of a slice position within its CLB."""

    L12 = "L12"   # top-connected L slices
    L3 = "L3"     # bottom-connected L slices
    M = "M"       # bottom-connected M slices


CORNERS = ("TL", "TR", "BL", "BR")


def classify_corner(corner: str, clb_has_m_bottom: bool) -> SliceClass:
    """Map a CLB corner position to its routing class.

    Top corners always route as L12; bottom corners route as M when the CLB
    carries M-type bottom slices, L3 otherwise.
    """
    if corner not in CORNERS:
        raise ValueError(f"unknown corner {corner!r}, expected one of {CORNERS}")
    if corner in ("TL", "TR"):
        return SliceClass.L12
    return SliceClass.M if clb_has_m_bottom else SliceClass.L3


@dataclass(frozen=True)
class FabricSite:
    """One slice position on the fabric, identified by CLB coords and corner."""

    clb_x: int
    clb_y: int
    corner: str
    slice_class: SliceClass
    excluded: bool = False

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.clb_x, self.clb_y, self.corner)


@dataclass(frozen=True)
class EnvCondition:
    """Operating point: ambient temperature (degC) and supply voltage (mV)."""

    temp_c: float
    vcc_mv: float

    def is_reference(self) -> bool:
        return self.temp_c == REFERENCE_TEMP_C and self.vcc_mv == REFERENCE_VCC_MV


REFERENCE_ENV = EnvCondition(REFERENCE_TEMP_C, REFERENCE_VCC_MV)


@dataclass(frozen=True)
class DeviceSpec:
    """Statistical description of one FPGA family.

    Frequencies are MHz except ``sigma_span`` and ``meas_sigma`` which are
    kHz.  ``temp_coeff_*`` is fractional frequency change per degC,
    ``volt_coeff_*`` per unit of relative supply deviation (V - Vref)/Vref.
    """

    kind: str
    site_count: int
    mean_freq_base: float
    mean_span: float
    sigma_span: float
    class_bias: Mapping[str, float] = field(default_factory=dict)
    systematic_gradient: float = 0.0
    temp_coeff_mean: float = -1.0e-4
    temp_coeff_sigma: float = 2.0e-5
    volt_coeff_mean: float = 0.5
    volt_coeff_sigma: float = 0.02
    meas_sigma: float = 50.0
    central_exclusion: float = 0.05
    erroneous_fraction: float = 0.02
    erroneous_sigma_mult: float = 30.0

    def validate(self) -> None:
        if self.site_count <= 0:
            raise ConfigError(f"site_count must be positive, got {self.site_count}")
        if self.mean_span < 0 or self.sigma_span < 0:
            raise ConfigError("mean_span and sigma_span must be non-negative")
        if self.meas_sigma < 0:
            raise ConfigError("meas_sigma must be non-negative")
        if not 0.0 <= self.central_exclusion < 0.5:
            raise ConfigError("central_exclusion must lie in [0, 0.5)")
        if not 0.0 <= self.erroneous_fraction < 1.0:
            raise ConfigError("erroneous_fraction must lie in [0, 1)")
        for name in self.class_bias:
            if name not in SliceClass.__members__:
                raise ConfigError(f"unknown slice class {name!r} in class_bias")

    def bias_for(self, cls: SliceClass) -> float:
        return float(self.class_bias.get(cls.value, 0.0))


# Presets matching the measured population statistics of the three boards:
# site counts, mean-frequency spans (MHz) and sigma spans (kHz).  Class
# offsets place the basys3 class-conditional means at ~418.1 / ~410 / ~402.3
# MHz with the L12 > L3 > M ordering.
PRESETS: dict[str, DeviceSpec] = {
    "nexys4ddr": DeviceSpec(
        kind="nexys4ddr", site_count=11264, mean_freq_base=420.0,
        mean_span=64.78, sigma_span=249.4,
        class_bias={"L12": 18.0, "L3": 8.4, "M": 0.0},
        systematic_gradient=0.13,
    ),
    "basys3": DeviceSpec(
        kind="basys3", site_count=5696, mean_freq_base=402.3,
        mean_span=54.28, sigma_span=235.24,
        class_bias={"L12": 15.8, "L3": 7.7, "M": 0.0},
        systematic_gradient=0.135,
    ),
    "zybo": DeviceSpec(
        kind="zybo", site_count=3520, mean_freq_base=415.0,
        mean_span=54.71, sigma_span=229.4,
        class_bias={"L12": 15.9, "L3": 7.8, "M": 0.0},
        systematic_gradient=0.17,
    ),
}


def get_preset(name: str) -> DeviceSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown device preset {name!r}; known: {sorted(PRESETS)}") from None


def load_device_spec(path: str) -> DeviceSpec:
    """Load a DeviceSpec from a JSON config file.

    The file may set ``"preset"`` to start from a built-in spec; any other
    keys override individual fields.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("device spec file must hold a JSON object")
    preset = raw.pop("preset", None)
    base = asdict(get_preset(preset)) if preset else {}
    base.update(raw)
    try:
        spec = DeviceSpec(**base)
    except TypeError as exc:
        raise ConfigError(f"bad device spec file {path}: {exc}") from None
    spec.validate()
    return spec


@dataclass(eq=False)
class ChipProfile:
    """Per-site frequency model for one device.

    ``nominal_freq`` holds the noise-free reference-condition frequency in
    MHz.  ``temp_coeff``/``volt_coeff`` are per-site environmental response
    coefficients; they are None for ingested chips, which therefore cannot be
    swept over environments.  ``meas_sigma_site`` is the per-site measurement
    noise standard deviation in MHz.
    """

    device_id: str
    spec: DeviceSpec
    sites: list[FabricSite]
    nominal_freq: np.ndarray
    temp_coeff: Optional[np.ndarray]
    volt_coeff: Optional[np.ndarray]
    meas_sigma_site: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.sites)
        for name in ("nominal_freq", "meas_sigma_site"):
            arr = getattr(self, name)
            if len(arr) != n:
                raise ValueError(f"{name} length {len(arr)} != site count {n}")
        for name in ("temp_coeff", "volt_coeff"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise ValueError(f"{name} length {len(arr)} != site count {n}")
        if np.any(self.nominal_freq <= 0):
            raise ValueError("all nominal frequencies must be strictly positive")

    @property
    def site_count(self) -> int:
        return len(self.sites)

    @property
    def has_env_model(self) -> bool:
        return self.temp_coeff is not None and self.volt_coeff is not None

    def active_indices(self) -> np.ndarray:
        return np.array([i for i, s in enumerate(self.sites) if not s.excluded], dtype=np.intp)


def _fabric_dims(n_clb: int) -> tuple[int, int]:
    nx = int(math.ceil(math.sqrt(n_clb)))
    ny = int(math.ceil(n_clb / nx))
    return nx, ny


def build_fabric(spec: DeviceSpec) -> list[FabricSite]:
    """Lay out ``site_count`` slice sites over a near-square CLB grid.

    Odd CLB columns carry M-type bottom slices (the L/M column interleave of
    the real fabric).  Sites inside the central exclusion box are flagged and
    never characterized or used for oscillators.
    """
    n_clb = (spec.site_count + 3) // 4
    nx, ny = _fabric_dims(n_clb)
    cx, cy = (nx - 1) / 2.0, (ny - 1) / 2.0
    half_w, half_h = spec.central_exclusion * nx, spec.central_exclusion * ny
    sites: list[FabricSite] = []
    for y in range(ny):
        for x in range(nx):
            if len(sites) >= spec.site_count:
                break
            has_m = x % 2 == 1
            excluded = abs(x - cx) < half_w and abs(y - cy) < half_h
            for corner in CORNERS:
                if len(sites) >= spec.site_count:
                    break
                sites.append(FabricSite(x, y, corner, classify_corner(corner, has_m), excluded))
    return sites


def _expected_range_factor(n: int) -> float:
    # expected range of n iid standard normals, Blom approximation
    if n < 2:
        return 1.0
    q = (n - 0.375) / (n + 0.25)
    return 2.0 * statistics.NormalDist().inv_cdf(q)


def synth_chip(spec: DeviceSpec, device_seed: int, device_id: str | None = None) -> ChipProfile:
    """Generate one device: deterministic for a fixed (spec, device_seed).

    The class offsets and planar gradient are functions of the spec alone, so
    devices of one family share their systematic structure; the random
    component, environmental coefficients and per-site noise levels are drawn
    from ``device_seed``.  The random scale is calibrated so that the nominal
    population span comes out near ``spec.mean_span``.
    """
    spec.validate()
    rng = np.random.default_rng(device_seed)
    sites = build_fabric(spec)
    n = len(sites)

    class_off = np.array([spec.bias_for(s.slice_class) for s in sites])
    diag = np.array([s.clb_x + s.clb_y for s in sites], dtype=float)
    sys_off = spec.systematic_gradient * (diag - diag.mean())

    bias_values = [spec.bias_for(c) for c in SliceClass]
    cb_span = max(bias_values) - min(bias_values)
    sys_span = spec.systematic_gradient * (diag.max() - diag.min()) if n > 1 else 0.0
    residual_span = max(0.0, spec.mean_span - cb_span - sys_span)
    # 1.32 compensates for the component extremes not co-occurring on one site
    sigma_rand = 1.32 * residual_span / _expected_range_factor(n)

    nominal = spec.mean_freq_base + class_off + sys_off + rng.normal(0.0, sigma_rand, n)

    temp_coeff = rng.normal(spec.temp_coeff_mean, spec.temp_coeff_sigma, n)
    volt_coeff = rng.normal(spec.volt_coeff_mean, spec.volt_coeff_sigma, n)

    meas_sigma = (spec.meas_sigma + rng.uniform(0.0, spec.sigma_span, n)) * KHZ_TO_MHZ
    if spec.erroneous_fraction > 0:
        bad = rng.random(n) < spec.erroneous_fraction
        meas_sigma = np.where(bad, meas_sigma * spec.erroneous_sigma_mult, meas_sigma)

    return ChipProfile(
        device_id=device_id or f"{spec.kind}_{device_seed}",
        spec=spec,
        sites=sites,
        nominal_freq=nominal,
        temp_coeff=temp_coeff,
        volt_coeff=volt_coeff,
        meas_sigma_site=meas_sigma,
    )


def _env_scale(chip: ChipProfile, env: EnvCondition) -> np.ndarray | float:
    if env.is_reference():
        return 1.0
    if not chip.has_env_model:
        raise ValueError(
            f"chip {chip.device_id} has no environmental coefficients "
            "(ingested data); only the reference condition is available"
        )
    dt = env.temp_c - REFERENCE_TEMP_C
    dv = (env.vcc_mv - REFERENCE_VCC_MV) / REFERENCE_VCC_MV
    return 1.0 + chip.temp_coeff * dt + chip.volt_coeff * dv


def env_frequency(chip: ChipProfile, site_index: int, env: EnvCondition) -> float:
    """Frequency of one site at the given condition, MHz.

    f = f_nom * (1 + k_T*(T - Tref) + k_V*(V - Vref)/Vref); returns the
    nominal frequency exactly at the reference condition.
    """
    if not 0 <= site_index < chip.site_count:
        raise IndexError(f"site index {site_index} out of range [0, {chip.site_count})")
    scale = _env_scale(chip, env)
    if isinstance(scale, float):
        return float(chip.nominal_freq[site_index]) * scale
    return float(chip.nominal_freq[site_index] * scale[site_index])


def env_frequency_all(chip: ChipProfile, env: EnvCondition) -> np.ndarray:
    """Vector of all site frequencies at the given condition, MHz."""
    return chip.nominal_freq * _env_scale(chip, env)


def measure_count(
    freq_mhz: float,
    t_on_us: float = DEFAULT_T_ON_US,
    rng: np.random.Generator | None = None,
    meas_sigma_mhz: float = 0.0,
) -> int:
    """One noisy pulse count over the enable window: round((f + eps) * t_on).

    Noise is injected in the frequency domain before quantization; the count
    saturates at zero.
    """
    if freq_mhz <= 0:
        raise ValueError(f"frequency must be positive, got {freq_mhz}")
    if t_on_us <= 0:
        raise ValueError(f"enable duration must be positive, got {t_on_us}")
    f = freq_mhz
    if meas_sigma_mhz > 0:
        if rng is None:
            raise ValueError("rng required when measurement noise is enabled")
        f = f + rng.normal(0.0, meas_sigma_mhz)
    return max(0, int(round(f * t_on_us)))


def measure_counts(
    freqs_mhz: np.ndarray,
    t_on_us: float,
    rng: np.random.Generator | None,
    meas_sigma_mhz: np.ndarray | float,
) -> np.ndarray:
    """Vectorized ``measure_count`` with independent noise per entry."""
    f = np.asarray(freqs_mhz, dtype=float)
    sigma = np.broadcast_to(np.asarray(meas_sigma_mhz, dtype=float), f.shape)
    if np.any(sigma > 0):
        if rng is None:
            raise ValueError("rng required when measurement noise is enabled")
        f = f + rng.standard_normal(f.shape) * sigma
    counts = np.rint(f * t_on_us)
    return np.maximum(counts, 0.0).astype(np.int64)


def _parse_header(fields: list[str]) -> tuple[list[str], bool, int]:
    required = ["clb_x", "clb_y", "corner"]
    for col in required:
        if col not in fields:
            raise DataError(f"missing required column {col!r} in CSV header")
    has_class = "class" in fields
    sample_cols = [f for f in fields if f.startswith("mhz_") or f.startswith("count_")]
    if not sample_cols:
        raise DataError("no sample columns found (expected mhz_* or count_*)")
    kinds = {c.split("_")[0] for c in sample_cols}
    if len(kinds) != 1:
        raise DataError("sample columns must be all mhz_* or all count_*")
    return sample_cols, has_class, len(sample_cols)


def ingest_csv(path: str, device_id: str | None = None) -> ChipProfile:
    """Build a ChipProfile from measured per-site samples.

    Expected columns: ``clb_x,clb_y,corner[,class],<samples>`` where the
    sample columns are ``mhz_1..mhz_m`` or ``count_1..count_m``.  Count data
    is converted with the enable duration declared in a leading
    ``# t_on_us=<value>`` comment (default 122.87).  Nominal frequencies are
    the per-site sample means; environmental coefficients stay unset.
    """
    t_on_us = DEFAULT_T_ON_US
    sites: list[FabricSite] = []
    means: list[float] = []
    sigmas: list[float] = []
    seen: set[tuple[int, int, str]] = set()

    with open(path, "r", encoding="utf-8", newline="") as fh:
        header: list[str] | None = None
        sample_cols: list[str] = []
        has_class = False
        counts_mode = False
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (row[0].startswith("#") and header is None):
                if row and row[0].startswith("#") and "t_on_us=" in row[0]:
                    t_on_us = float(row[0].split("t_on_us=")[1])
                continue
            if header is None:
                header = [c.strip() for c in row]
                sample_cols, has_class, _ = _parse_header(header)
                counts_mode = sample_cols[0].startswith("count_")
                continue
            rec = dict(zip(header, row))
            try:
                x, y = int(rec["clb_x"]), int(rec["clb_y"])
                corner = rec["corner"].strip()
                if corner not in CORNERS:
                    raise ValueError(f"bad corner {corner!r}")
                samples = np.array([float(rec[c]) for c in sample_cols])
            except (KeyError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed row ({exc})") from None
            if counts_mode:
                samples = samples / t_on_us
            key = (x, y, corner)
            if key in seen:
                raise DataError(f"{path}:{lineno}: duplicate site {key}")
            seen.add(key)
            if has_class:
                cls = SliceClass(rec["class"].strip())
            else:
                cls = classify_corner(corner, clb_has_m_bottom=(x % 2 == 1))
            sites.append(FabricSite(x, y, corner, cls))
            means.append(float(samples.mean()))
            sigmas.append(float(samples.std(ddof=1)) if len(samples) > 1 else 0.0)

    if header is None:
        raise DataError(f"{path}: empty file")
    if not sites:
        raise DataError(f"{path}: no data rows")

    spec = DeviceSpec(
        kind="custom", site_count=len(sites),
        mean_freq_base=float(np.mean(means)),
        mean_span=float(np.max(means) - np.min(means)),
        sigma_span=float((np.max(sigmas) - np.min(sigmas)) / KHZ_TO_MHZ),
        meas_sigma=0.0, central_exclusion=0.0, erroneous_fraction=0.0,
    )
    return ChipProfile(
        device_id=device_id or "ingested",
        spec=spec,
        sites=sites,
        nominal_freq=np.array(means),
        temp_coeff=None,
        volt_coeff=None,
        meas_sigma_site=np.array(sigmas),
    )
