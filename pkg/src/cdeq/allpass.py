"""First-order complex all-pass sections and cascades.

A section with pole ``rho * exp(j theta)`` has transfer function

    H(z) = (-rho e^{-j theta} + z^{-1}) / (1 - rho e^{j theta} z^{-1})

which is unimodular on the unit circle for ``rho < 1``.  A cascade is an
ordered list of sections with one constant output phase ``phi0`` applied
at the end; it shapes group delay only.  Streaming filtering runs each
section's one-pole recursion with carried state so long records can be
processed in chunks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.signal import lfilter

RHO_MAX = 0.9999
"""Largest admissible pole radius; keeps the streaming recursion well away
from the unit circle."""


def normalize_angle(angle: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return float((angle + np.pi) % (2.0 * np.pi) - np.pi)


@dataclass(frozen=True)
class AllpassSection:
    """Pole radius and angle of one first-order all-pass section."""

    rho: float
    theta: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.rho) or not (0.0 <= self.rho <= RHO_MAX):
            raise ValueError(
                f"rho must lie in [0, {RHO_MAX}], got {self.rho!r}")
        if not np.isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta!r}")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def pole(self) -> complex:
        return self.rho * np.exp(1j * self.theta)


@dataclass(frozen=True)
class AllpassCascade:
    """Ordered all-pass sections plus a constant output phase ``phi0``.

    ``band`` optionally records which sub-band the cascade equalizes.
    """

    sections: tuple[AllpassSection, ...]
    phi0: float = 0.0
    band: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sections", tuple(self.sections))
        if not np.isfinite(self.phi0):
            raise ValueError("phi0 must be finite")
        object.__setattr__(self, "phi0", normalize_angle(self.phi0))

    def __len__(self) -> int:
        return len(self.sections)

    @property
    def rho(self) -> NDArray[np.float64]:
        return np.array([s.rho for s in self.sections], dtype=float)

    @property
    def theta(self) -> NDArray[np.float64]:
        return np.array([s.theta for s in self.sections], dtype=float)


def section_response(section: AllpassSection, omega) -> NDArray[np.complex128]:
    """Frequency response of one section; |result| == 1."""
    omega = np.asarray(omega, dtype=float)
    pole = section.pole
    z1 = np.exp(-1j * omega)
    return (-np.conj(pole) + z1) / (1.0 - pole * z1)


def section_group_delay(section: AllpassSection, omega) -> NDArray[np.float64]:
    """Group delay ``(1 - rho^2) / (1 + rho^2 - 2 rho cos(w - theta))``.

    Strictly positive for ``rho < 1``; integrates to 2*pi over one period.
    """
    omega = np.asarray(omega, dtype=float)
    rho = section.rho
    denom = 1.0 + rho * rho - 2.0 * rho * np.cos(omega - section.theta)
    return (1.0 - rho * rho) / denom


def cascade_response(cascade: AllpassCascade, omega) -> NDArray[np.complex128]:
    """Product of section responses times ``exp(-j phi0)``."""
    omega = np.asarray(omega, dtype=float)
    out = np.full(omega.shape, np.exp(-1j * cascade.phi0), dtype=complex)
    for section in cascade.sections:
        out *= section_response(section, omega)
    return out


def cascade_group_delay(cascade: AllpassCascade, omega) -> NDArray[np.float64]:
    """Sum of section group delays; ``phi0`` contributes nothing."""
    omega = np.asarray(omega, dtype=float)
    out = np.zeros(omega.shape, dtype=float)
    for section in cascade.sections:
        out += section_group_delay(section, omega)
    return out


def unwrap_phase(phase: NDArray[np.float64]) -> NDArray[np.float64]:
    """Unwrap sampled phase by nearest-multiple-of-2*pi continuation.

    The grid must be dense enough that true adjacent phase steps stay
    below pi; raggedness beyond that is ambiguous and rejected.
    """
    phase = np.asarray(phase, dtype=float)
    unwrapped = np.unwrap(phase)
    if phase.size > 1 and np.max(np.abs(np.diff(unwrapped))) >= np.pi:
        raise ValueError("phase grid too coarse to unwrap unambiguously")
    return unwrapped


def init_state(cascade: AllpassCascade) -> NDArray[np.complex128]:
    """Fresh streaming state: one (input, output) memory pair per section."""
    return np.zeros((len(cascade), 2), dtype=complex)


def filter_stream(cascade: AllpassCascade, x, state=None):
    """Run ``x`` through the cascade, returning (output, updated state).

    Each section applies ``y[n] = -rho e^{-j theta} x[n] + x[n-1]
    + rho e^{j theta} y[n-1]`` and the final output picks up
    ``exp(-j phi0)``.  Passing the returned state into the next call
    continues the stream exactly: chunked and one-shot processing give
    identical output samples.
    """
    x = np.asarray(x, dtype=complex)
    if x.ndim != 1:
        raise ValueError("input must be a 1-D sequence")
    if state is None:
        state = init_state(cascade)
    state = np.asarray(state, dtype=complex)
    if state.shape != (len(cascade), 2):
        raise ValueError(
            f"state shape {state.shape} does not match cascade of "
            f"{len(cascade)} sections (expected {(len(cascade), 2)})")
    new_state = state.copy()
    y = x
    if x.size:
        for i, section in enumerate(cascade.sections):
            pole = section.pole
            x_prev, y_prev = new_state[i]
            # direct-form II transposed carry for b=[-conj(p), 1], a=[1, -p]
            zi = np.array([x_prev + pole * y_prev])
            x_in = y
            y, zf = lfilter([-np.conj(pole), 1.0], [1.0, -pole], x_in, zi=zi)
            new_state[i, 0] = x_in[-1]
            new_state[i, 1] = y[-1]
        y = y * np.exp(-1j * cascade.phi0)
    return y, new_state


# --- coefficient records ------------------------------------------------
#
# Cascades cross module and process boundaries as plain dicts with floats
# rounded to 15 significant digits, ready for JSON serialization.

def _f15(value: float) -> float:
    return float(f"{float(value):.15g}")


def cascade_to_record(cascade: AllpassCascade, delay_offset: int | None = None) -> dict:
    """Serializable record of one cascade (15 significant digits)."""
    record = {
        "band": cascade.band,
        "sections": [{"rho": _f15(s.rho), "theta": _f15(s.theta)}
                     for s in cascade.sections],
        "phi0": _f15(cascade.phi0),
    }
    if delay_offset is not None:
        record["delay_offset"] = int(delay_offset)
    return record


def cascade_from_record(record: dict) -> AllpassCascade:
    """Rebuild a cascade from :func:`cascade_to_record` output."""
    sections = tuple(AllpassSection(rho=s["rho"], theta=s["theta"])
                     for s in record["sections"])
    return AllpassCascade(sections=sections, phi0=record["phi0"],
                          band=record.get("band"))
