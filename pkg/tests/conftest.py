"""Shared fixtures; the expensive equalizer designs are session-scoped."""

import numpy as np
import pytest

from cdeq.channel import ChannelParams
from cdeq.design import FrequencyGrid, WeightingSpec, design_all_bands
from cdeq.filterbank import FilterBankConfig, design_rrc
from cdeq.linksim import LinkConfig, design_for_config

# reference link: 28 GBaud QPSK, 1550 nm, D=16 ps/nm/km, 2000 km, B=56 GS/s
REF_LAMBDA0 = 1550e-9
REF_DISPERSION = 16.0
REF_LENGTH = 2000e3
REF_SAMPLE_RATE = 56e9
REF_M = 32
REF_K = 8
REF_PROTO_ROLL = 0.2


@pytest.fixture(scope="session")
def ref_alpha() -> float:
    return ChannelParams.from_fiber(REF_LAMBDA0, REF_DISPERSION,
                                    REF_LENGTH, REF_SAMPLE_RATE).alpha


@pytest.fixture(scope="session")
def grid() -> FrequencyGrid:
    return FrequencyGrid(2048)


@pytest.fixture(scope="session")
def rc_weighting() -> WeightingSpec:
    return WeightingSpec("rc_squared", 0.6 * np.pi, 0.1)


@pytest.fixture(scope="session")
def uniform_weighting() -> WeightingSpec:
    return WeightingSpec("uniform")


@pytest.fixture(scope="session")
def fb_cfg() -> FilterBankConfig:
    return FilterBankConfig(REF_M, REF_K)


@pytest.fixture(scope="session")
def proto(fb_cfg):
    return design_rrc(REF_M, REF_K, REF_PROTO_ROLL)


@pytest.fixture(scope="session")
def fb_design_weighted(ref_alpha, fb_cfg, rc_weighting, grid):
    """Full 32-band design with the raised-cosine weighting (slow)."""
    return design_all_bands(ref_alpha, fb_cfg, rc_weighting, grid)


@pytest.fixture(scope="session")
def fb_design_uniform(ref_alpha, fb_cfg, uniform_weighting, grid):
    """Full 32-band design with uniform weighting (slow)."""
    return design_all_bands(ref_alpha, fb_cfg, uniform_weighting, grid)


@pytest.fixture(scope="session")
def fullband_design():
    """Single-cascade baseline design for the reference link (slow)."""
    config = LinkConfig(seed=0, equalizer="fullband_iir", n_symbols=10_000)
    return design_for_config(config)
