"""Tests for the dispersion channel model."""

import math

import numpy as np
import pytest

from cdeq.channel import (SPEED_OF_LIGHT, ChannelParams, apply_cd, cd_response,
                          compute_alpha, subband_cd_response)

from conftest import (REF_DISPERSION, REF_LAMBDA0, REF_LENGTH,
                      REF_SAMPLE_RATE)


def reference_alpha() -> float:
    # independent arithmetic (math module, no package code)
    return (REF_LAMBDA0 ** 2) * (REF_SAMPLE_RATE ** 2) * (REF_DISPERSION * 1e-6) \
        * REF_LENGTH / (4.0 * math.pi * SPEED_OF_LIGHT)


class TestComputeAlpha:
    def test_reference_link(self):
        alpha = compute_alpha(REF_LAMBDA0, REF_DISPERSION * 1e-6,
                              REF_LENGTH, REF_SAMPLE_RATE)
        assert alpha == pytest.approx(reference_alpha(), rel=1e-14)
        assert alpha == pytest.approx(63.9969, abs=5e-4)

    def test_zero_length(self):
        assert compute_alpha(REF_LAMBDA0, 16e-6, 0.0, REF_SAMPLE_RATE) == 0.0

    def test_quadratic_in_sample_rate(self):
        a1 = compute_alpha(REF_LAMBDA0, 16e-6, REF_LENGTH, 56e9)
        a2 = compute_alpha(REF_LAMBDA0, 16e-6, REF_LENGTH, 112e9)
        assert a2 == pytest.approx(4.0 * a1, rel=1e-14)
        assert a2 == pytest.approx(255.99, abs=0.02)

    @pytest.mark.parametrize("bad", [
        dict(lambda0=-1e-9), dict(dispersion=-1.0), dict(length=float("nan")),
        dict(sample_rate=0.0), dict(sample_rate=float("inf")),
    ])
    def test_rejects_bad_parameters(self, bad):
        args = dict(lambda0=REF_LAMBDA0, dispersion=16e-6,
                    length=REF_LENGTH, sample_rate=REF_SAMPLE_RATE)
        args.update(bad)
        with pytest.raises(ValueError):
            compute_alpha(**args)


class TestChannelParams:
    def test_from_fiber_converts_units(self):
        p = ChannelParams.from_fiber(REF_LAMBDA0, REF_DISPERSION,
                                     REF_LENGTH, REF_SAMPLE_RATE)
        assert p.dispersion == pytest.approx(16e-6, rel=1e-15)
        assert p.alpha == pytest.approx(reference_alpha(), rel=1e-12)

    def test_inconsistent_alpha_rejected(self):
        with pytest.raises(ValueError, match="inconsistent"):
            ChannelParams(lambda0=REF_LAMBDA0, dispersion=16e-6,
                          length=REF_LENGTH, sample_rate=REF_SAMPLE_RATE,
                          alpha=1.0)


class TestCdResponse:
    def test_zero_frequency(self):
        assert cd_response(17.3, 0.0) == pytest.approx(1.0 + 0.0j)

    def test_direct_evaluation_at_pi(self):
        import cmath
        expected = cmath.exp(-1j * 63.995 * math.pi ** 2)
        assert cd_response(63.995, math.pi) == pytest.approx(expected, rel=1e-12)

    def test_unimodular(self):
        rng = np.random.default_rng(0)
        alphas = rng.uniform(0, 500, 1000)
        omegas = rng.uniform(-np.pi, np.pi, 1000)
        mags = np.abs([cd_response(a, w) for a, w in zip(alphas, omegas)])
        np.testing.assert_allclose(mags, 1.0, atol=1e-13)


class TestApplyCd:
    def test_identity_at_zero_alpha(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(257) + 1j * rng.standard_normal(257)
        np.testing.assert_allclose(apply_cd(x, 0.0), x, atol=1e-12)

    def test_energy_conservation(self):
        # Parseval: the channel is a unit-modulus multiplier in frequency
        rng = np.random.default_rng(2)
        x = rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
        y = apply_cd(x, 63.9969)
        e_in = np.sum(np.abs(x) ** 2)
        e_out = np.sum(np.abs(y) ** 2)
        assert abs(e_out - e_in) <= 1e-10 * e_in

    def test_impulse_spreads(self):
        x = np.zeros(4096, dtype=complex)
        x[0] = 1.0
        y = apply_cd(x, 63.9969)
        assert np.sum(np.abs(y) ** 2) == pytest.approx(1.0, rel=1e-10)
        assert np.abs(y[0]) < 0.5  # energy no longer concentrated

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(2048) + 1j * rng.standard_normal(2048)
        back = apply_cd(apply_cd(x, 63.9969), -63.9969)
        nmse = np.mean(np.abs(back - x) ** 2) / np.mean(np.abs(x) ** 2)
        assert nmse <= 1e-9

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            apply_cd(np.array([], dtype=complex), 1.0)


class TestSubbandResponse:
    def test_dc_center_band(self):
        assert subband_cd_response(0.25, 0, 0.0) == pytest.approx(1.0 + 0.0j)

    def test_direct_evaluation(self):
        import cmath
        expected = cmath.exp(-1j * 0.25 * (16 * math.pi) ** 2)
        assert subband_cd_response(0.25, 16, 0.0) == pytest.approx(expected, rel=1e-9)

    def test_unimodular(self):
        rng = np.random.default_rng(4)
        vals = subband_cd_response(0.3, -5, rng.uniform(-np.pi, np.pi, 512))
        np.testing.assert_allclose(np.abs(vals), 1.0, atol=1e-13)

    def test_consistent_with_fullband(self):
        # the sub-band response is the full-band one at the mapped frequency
        rng = np.random.default_rng(5)
        m = 32
        alpha = 63.9969
        alpha_sub = alpha * (2.0 / m) ** 2
        for _ in range(200):
            k_signed = int(rng.integers(-m // 2 + 1, m // 2 + 1))
            omega_sub = float(rng.uniform(-np.pi, np.pi))
            omega = (2.0 / m) * (omega_sub + k_signed * np.pi)
            if abs(omega) > np.pi:
                continue
            lhs = cd_response(alpha, omega)
            rhs = subband_cd_response(alpha_sub, k_signed, omega_sub)
            assert abs(lhs - rhs) <= 1e-12
