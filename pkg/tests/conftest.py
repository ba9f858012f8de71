import numpy as np
import pytest

from ropufsim.chipmodel import ChipProfile, DeviceSpec, build_fabric, synth_chip


def toy_spec(**overrides) -> DeviceSpec:
    base = dict(
        kind="custom",
        site_count=400,
        mean_freq_base=400.0,
        mean_span=30.0,
        sigma_span=200.0,
        class_bias={"L12": 8.0, "L3": 4.0, "M": 0.0},
        systematic_gradient=0.1,
        meas_sigma=50.0,
        erroneous_fraction=0.02,
    )
    base.update(overrides)
    return DeviceSpec(**base)


@pytest.fixture
def small_spec() -> DeviceSpec:
    return toy_spec()


@pytest.fixture
def small_chip(small_spec) -> ChipProfile:
    return synth_chip(small_spec, device_seed=11)


def manual_chip(freqs, temp_coeff=None, volt_coeff=None, meas_sigma=0.0) -> ChipProfile:
    """Chip with hand-picked frequencies/coefficients on a minimal fabric."""
    n = len(freqs)
    spec = toy_spec(site_count=n, mean_span=0.0, sigma_span=0.0,
                    class_bias={}, systematic_gradient=0.0,
                    meas_sigma=0.0, erroneous_fraction=0.0, central_exclusion=0.0)
    sites = build_fabric(spec)
    return ChipProfile(
        device_id="manual",
        spec=spec,
        sites=sites,
        nominal_freq=np.asarray(freqs, dtype=float),
        temp_coeff=None if temp_coeff is None else np.full(n, temp_coeff, dtype=float),
        volt_coeff=None if volt_coeff is None else np.full(n, volt_coeff, dtype=float),
        meas_sigma_site=np.full(n, meas_sigma, dtype=float),
    )
