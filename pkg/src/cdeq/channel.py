"""Discrete-time chromatic-dispersion channel model.

A dispersive fiber acts on the complex baseband signal as a pure phase
(all-pass) filter ``H(w) = exp(-j * alpha * w**2)`` where ``w`` is the
normalized radial frequency in [-pi, pi) and ``alpha`` collects the fiber
and sampling parameters.  After an M-band analysis filter bank decimated
by M/2, each band sees the same channel re-centered on its own carrier,
which is what :func:`subband_cd_response` evaluates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

SPEED_OF_LIGHT = 2.99792458e8
"""Speed of light in m/s, fixed so derived coefficients are reproducible."""

# ps/nm/km expressed in s/m^2
_D_PS_NM_KM_TO_SI = 1e-6


def compute_alpha(lambda0: float, dispersion: float, length: float,
                  sample_rate: float) -> float:
    """Dispersion coefficient ``alpha = lambda0^2 B^2 D L / (4 pi c)``.

    Parameters
    ----------
    lambda0 : carrier wavelength in m.
    dispersion : fiber dispersion parameter in SI units (s/m^2).
    length : fiber length in m.
    sample_rate : sampling rate B in samples/s.

    Returns
    -------
    float
        Dimensionless quadratic-phase coefficient (units of rad when
        multiplied by a squared normalized frequency).
    """
    params = {"lambda0": lambda0, "dispersion": dispersion,
              "length": length, "sample_rate": sample_rate}
    for name, value in params.items():
        if not np.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")
        if value < 0:
            raise ValueError(f"{name} must be nonnegative, got {value!r}")
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    return (lambda0 ** 2) * (sample_rate ** 2) * dispersion * length / (
        4.0 * np.pi * SPEED_OF_LIGHT)


@dataclass(frozen=True)
class ChannelParams:
    """Physical link parameters plus the derived coefficient ``alpha``.

    ``dispersion`` is stored in SI units (s/m^2); use :meth:`from_fiber`
    to build from the customary ps/nm/km figure.
    """

    lambda0: float        # m
    dispersion: float     # s/m^2
    length: float         # m
    sample_rate: float    # samples/s
    alpha: float          # rad

    def __post_init__(self) -> None:
        expected = compute_alpha(self.lambda0, self.dispersion,
                                 self.length, self.sample_rate)
        scale = max(abs(expected), 1.0)
        if abs(self.alpha - expected) > 1e-12 * scale:
            raise ValueError(
                f"alpha={self.alpha!r} inconsistent with parameters "
                f"(expected {expected!r})")

    @classmethod
    def from_fiber(cls, lambda0: float, dispersion_ps_nm_km: float,
                   length: float, sample_rate: float) -> "ChannelParams":
        """Build from wavelength (m), D (ps/nm/km), length (m) and rate (S/s)."""
        dispersion = dispersion_ps_nm_km * _D_PS_NM_KM_TO_SI
        alpha = compute_alpha(lambda0, dispersion, length, sample_rate)
        return cls(lambda0=lambda0, dispersion=dispersion, length=length,
                   sample_rate=sample_rate, alpha=alpha)


def cd_response(alpha: float, omega) -> NDArray[np.complex128]:
    """Channel frequency response ``exp(-j alpha omega^2)``; unit modulus."""
    omega = np.asarray(omega, dtype=float)
    return np.exp(-1j * alpha * omega ** 2)


def subband_cd_response(alpha_sub: float, k_signed: int,
                        omega) -> NDArray[np.complex128]:
    """Channel response seen by one sub-band after analysis and decimation.

    ``alpha_sub`` is the full-band coefficient scaled by (2/M)^2 and
    ``k_signed`` the signed band index; the response is
    ``exp(-j alpha_sub (omega + k_signed*pi)^2)`` on the sub-band
    frequency axis.
    """
    omega = np.asarray(omega, dtype=float)
    return np.exp(-1j * alpha_sub * (omega + k_signed * np.pi) ** 2)


def apply_cd(signal, alpha: float) -> NDArray[np.complex128]:
    """Apply the dispersion channel to a finite record.

    Uses a single full-length transform with bin frequencies
    ``2 pi n / N`` wrapped to [-pi, pi).  The operation is unitary, so
    the output has the same length and energy as the input, and is
    inverted exactly by negating ``alpha``.
    """
    x = np.asarray(signal, dtype=complex)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("signal must be a non-empty 1-D sequence")
    omega = 2.0 * np.pi * np.fft.fftfreq(x.size)
    return np.fft.ifft(np.fft.fft(x) * np.exp(-1j * alpha * omega ** 2))
