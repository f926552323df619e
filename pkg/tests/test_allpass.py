"""Tests for all-pass sections, cascades and streaming filtering."""

import numpy as np
import pytest

from cdeq.allpass import (RHO_MAX, AllpassCascade, AllpassSection,
                          cascade_from_record, cascade_group_delay,
                          cascade_response, cascade_to_record, filter_stream,
                          init_state, normalize_angle, section_group_delay,
                          section_response, unwrap_phase)


def random_cascade(rng, n_sections, rho_max=0.95, phi0=None):
    sections = tuple(
        AllpassSection(rho=float(r), theta=float(t))
        for r, t in zip(rng.uniform(0.0, rho_max, n_sections),
                        rng.uniform(-np.pi, np.pi, n_sections)))
    if phi0 is None:
        phi0 = float(rng.uniform(-np.pi, np.pi))
    return AllpassCascade(sections=sections, phi0=phi0)


class TestSection:
    def test_rejects_unstable(self):
        with pytest.raises(ValueError):
            AllpassSection(rho=1.0, theta=0.0)
        with pytest.raises(ValueError):
            AllpassSection(rho=-0.1, theta=0.0)
        AllpassSection(rho=RHO_MAX, theta=0.0)  # boundary admissible

    def test_theta_normalized(self):
        s = AllpassSection(rho=0.5, theta=3 * np.pi)
        assert -np.pi <= s.theta < np.pi
        assert s.theta == pytest.approx(normalize_angle(3 * np.pi))

    def test_zero_radius_is_pure_delay(self):
        s = AllpassSection(rho=0.0, theta=0.3)
        w = np.linspace(-np.pi, np.pi, 64, endpoint=False)
        np.testing.assert_allclose(section_response(s, w), np.exp(-1j * w),
                                   atol=1e-15)

    def test_response_at_pole_angle(self):
        # numerator and denominator share the factor (1 - rho)
        s = AllpassSection(rho=0.5, theta=1.0)
        assert section_response(s, 1.0) == pytest.approx(np.exp(-1j * 1.0),
                                                         rel=1e-14)

    def test_unimodular(self):
        s = AllpassSection(rho=0.5, theta=1.0)
        assert abs(abs(section_response(s, 2.0)) - 1.0) <= 1e-12


class TestSectionGroupDelay:
    def test_unit_delay(self):
        s = AllpassSection(rho=0.0, theta=0.0)
        w = np.linspace(-np.pi, np.pi, 33)
        np.testing.assert_allclose(section_group_delay(s, w), 1.0, atol=1e-15)

    def test_peak_value(self):
        s = AllpassSection(rho=0.5, theta=0.7)
        assert section_group_delay(s, 0.7) == pytest.approx(3.0, rel=1e-14)

    def test_positive_everywhere(self):
        rng = np.random.default_rng(0)
        w = np.linspace(-np.pi, np.pi, 4096, endpoint=False)
        for _ in range(20):
            s = AllpassSection(rho=float(rng.uniform(0, 0.999)),
                               theta=float(rng.uniform(-np.pi, np.pi)))
            assert np.all(section_group_delay(s, w) > 0)

    def test_matches_phase_derivative(self):
        # central differences of the response phase, h = 1e-5
        rng = np.random.default_rng(1)
        h = 1e-5
        for _ in range(20):
            s = AllpassSection(rho=float(rng.uniform(0, 0.97)),
                               theta=float(rng.uniform(-np.pi, np.pi)))
            w = float(rng.uniform(-np.pi, np.pi))
            ratio = section_response(s, w + h) * np.conj(section_response(s, w - h))
            numeric = -np.angle(ratio) / (2 * h)
            analytic = section_group_delay(s, w)
            assert abs(numeric - analytic) <= 1e-6 * abs(analytic)

    def test_area_identity(self):
        # each section contributes exactly 2*pi of delay area per period
        rng = np.random.default_rng(2)
        n = 8192
        w = -np.pi + 2 * np.pi * np.arange(n) / n
        for rho in (0.0, 0.3, 0.9, 0.99):
            s = AllpassSection(rho=rho, theta=float(rng.uniform(-np.pi, np.pi)))
            area = np.sum(section_group_delay(s, w)) * (2 * np.pi / n)
            assert area == pytest.approx(2 * np.pi, rel=1e-6)


class TestCascade:
    def test_empty_cascade_is_constant(self):
        c = AllpassCascade(sections=(), phi0=0.0)
        w = np.linspace(-np.pi, np.pi, 16)
        np.testing.assert_allclose(cascade_response(c, w), 1.0, atol=1e-15)
        np.testing.assert_allclose(cascade_group_delay(c, w), 0.0, atol=1e-15)

    def test_single_section_composition(self):
        s = AllpassSection(rho=0.4, theta=-0.5)
        c = AllpassCascade(sections=(s,), phi0=0.9)
        w = np.linspace(-np.pi, np.pi, 64, endpoint=False)
        expected = section_response(s, w) * np.exp(-1j * 0.9)
        np.testing.assert_allclose(cascade_response(c, w), expected, atol=1e-14)

    def test_unimodular_on_grid(self):
        rng = np.random.default_rng(3)
        w = np.linspace(-np.pi, np.pi, 4096, endpoint=False)
        c = random_cascade(rng, 12)
        np.testing.assert_allclose(np.abs(cascade_response(c, w)), 1.0,
                                   atol=1e-12)

    def test_identical_unit_delays(self):
        c = AllpassCascade(sections=tuple(AllpassSection(0.0, 0.0)
                                          for _ in range(7)), phi0=0.0)
        w = np.linspace(-np.pi, np.pi, 33)
        np.testing.assert_allclose(cascade_group_delay(c, w), 7.0, atol=1e-14)

    def test_delay_integrates_phase(self):
        # unwrapped response phase drop across the grid equals the
        # trapezoid integral of the group delay
        rng = np.random.default_rng(4)
        c = random_cascade(rng, 5, rho_max=0.8)
        n = 4096
        w = -np.pi + 2 * np.pi * np.arange(n) / n
        phase = unwrap_phase(np.angle(cascade_response(c, w)))
        tau = cascade_group_delay(c, w)
        dw = 2 * np.pi / n
        integral = np.cumsum((tau[1:] + tau[:-1]) / 2) * dw
        drop = phase[0] - phase[1:]
        np.testing.assert_allclose(drop, integral, atol=1e-6 * np.max(integral))

    def test_area_scales_with_sections(self):
        rng = np.random.default_rng(5)
        n = 8192
        w = -np.pi + 2 * np.pi * np.arange(n) / n
        c = random_cascade(rng, 9, rho_max=0.95)
        area = np.sum(cascade_group_delay(c, w)) * (2 * np.pi / n)
        assert area == pytest.approx(2 * np.pi * 9, rel=1e-6)


class TestFilterStream:
    def test_zero_radius_is_unit_delay(self):
        c = AllpassCascade(sections=(AllpassSection(0.0, 0.0),), phi0=0.0)
        x = np.arange(1.0, 9.0) + 0.0j
        y, _ = filter_stream(c, x)
        np.testing.assert_allclose(y[1:], x[:-1], atol=1e-15)

    def test_impulse_response_matches_frequency_response(self):
        rng = np.random.default_rng(6)
        c = random_cascade(rng, 6, rho_max=0.99)
        n = 1 << 16
        impulse = np.zeros(n, dtype=complex)
        impulse[0] = 1.0
        h, _ = filter_stream(c, impulse)
        bins = 2 * np.pi * np.fft.fftfreq(n)
        np.testing.assert_allclose(np.fft.fft(h), cascade_response(c, bins),
                                   atol=1e-6)

    def test_direct_recursion_equivalence(self):
        # independent oracle: the one-pole recursion written out by hand
        rng = np.random.default_rng(7)
        c = random_cascade(rng, 3, rho_max=0.9)
        x = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        y, _ = filter_stream(c, x)
        ref = x.copy()
        for s in c.sections:
            pole = s.rho * np.exp(1j * s.theta)
            out = np.zeros_like(ref)
            x_prev = 0.0 + 0.0j
            y_prev = 0.0 + 0.0j
            for i, xi in enumerate(ref):
                out[i] = -np.conj(pole) * xi + x_prev + pole * y_prev
                x_prev, y_prev = xi, out[i]
            ref = out
        ref *= np.exp(-1j * c.phi0)
        np.testing.assert_allclose(y, ref, atol=1e-12)

    def test_steady_state_unimodular(self):
        rng = np.random.default_rng(8)
        c = random_cascade(rng, 5, rho_max=0.9)
        n = np.arange(1 << 14)
        x = np.exp(1j * 0.37 * n)
        y, _ = filter_stream(c, x)
        tail = np.abs(y[n.size // 2:])
        np.testing.assert_allclose(tail, 1.0, atol=1e-6)

    def test_chunked_equals_oneshot_bitwise(self):
        rng = np.random.default_rng(9)
        c = random_cascade(rng, 4)
        x = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
        full, _ = filter_stream(c, x)
        state = init_state(c)
        parts = []
        for chunk in np.split(x, [137, 138, 500, 999]):
            out, state = filter_stream(c, chunk, state)
            parts.append(out)
        np.testing.assert_array_equal(np.concatenate(parts), full)

    def test_state_shape_mismatch(self):
        rng = np.random.default_rng(10)
        c = random_cascade(rng, 4)
        with pytest.raises(ValueError, match="state"):
            filter_stream(c, np.ones(8, dtype=complex),
                          np.zeros((3, 2), dtype=complex))


class TestRecords:
    def test_round_trip(self):
        rng = np.random.default_rng(11)
        c = AllpassCascade(
            sections=tuple(AllpassSection(float(r), float(t)) for r, t in
                           zip(rng.uniform(0, 0.99, 6),
                               rng.uniform(-np.pi, np.pi, 6))),
            phi0=0.123456789012345, band=4)
        rec = cascade_to_record(c, delay_offset=26)
        assert rec["delay_offset"] == 26
        back = cascade_from_record(rec)
        assert back.band == 4
        assert back.phi0 == pytest.approx(c.phi0, rel=1e-14)
        for a, b in zip(back.sections, c.sections):
            assert a.rho == pytest.approx(b.rho, rel=1e-14)
            assert a.theta == pytest.approx(b.theta, rel=1e-14)

    def test_record_is_json_serializable(self):
        import json
        c = AllpassCascade(sections=(AllpassSection(0.5, 0.25),), phi0=0.1)
        text = json.dumps(cascade_to_record(c))
        assert "0.5" in text
