"""Per-band all-pass equalizer design.

For band k of an M-band bank the dispersion channel contributes the
quadratic phase ``-alpha_sub (w + k' pi)^2`` on the decimated frequency
axis, where ``alpha_sub = alpha (2/M)^2`` and ``k'`` is the signed band
index.  The equalizer target is the opposite phase plus an integer
delay offset that keeps the desired group delay nonnegative where the
band carries signal; the offset fixes the section count through the
2*pi-per-section delay-area identity.

Each band is designed in four stages: pole placement by the delay-area
method, group-delay MSE descent, a closed-form constant-phase fit, and
a joint phase-transfer MSE descent.  Stability is maintained throughout
by optimizing a logistic reparameterization of the pole radii.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.special import expit

from .allpass import (RHO_MAX, AllpassCascade, AllpassSection,
                      cascade_from_record, cascade_to_record, normalize_angle)
from .filterbank import FilterBankConfig
from .optim import DivergenceError, OptimizerSettings, minimize

_RHO_FLOOR = 1e-3  # radius floor when entering the logistic parameterization


class InfeasibleTargetError(ValueError):
    """Desired group delay is nonpositive everywhere on the grid."""


class AmbiguousPhaseError(ValueError):
    """Degenerate weighting: the constant-phase fit has no minimizer."""


class DesignFailureError(RuntimeError):
    """Optimization diverged; carries the stage and band."""

    def __init__(self, stage: str, band: int | None, cause: Exception):
        super().__init__(f"design failed in stage {stage!r} for band {band}: {cause}")
        self.stage = stage
        self.band = band


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform endpoint-exclusive sampling of [-pi, pi).

    Integration uses the trapezoid rule on the periodic extension of the
    samples, which reduces to ``sum(values) * spacing``.
    """

    n_points: int = 2048

    def __post_init__(self) -> None:
        if self.n_points < 512:
            raise ValueError("n_points must be at least 512")

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.n_points

    @property
    def omega(self) -> NDArray[np.float64]:
        return -np.pi + self.spacing * np.arange(self.n_points)

    def integrate(self, values) -> float:
        return float(np.sum(values) * self.spacing)


@dataclass(frozen=True)
class WeightingSpec:
    """Spectral weighting for the design costs.

    ``rc_squared`` is a raised-cosine window: flat up to
    ``omega_c * (1 - roll_off)``, zero beyond ``omega_c * (1 + roll_off)``,
    cosine taper between.  ``uniform`` weights all frequencies equally.
    """

    kind: str = "rc_squared"
    omega_c: float = 0.6 * np.pi
    roll_off: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "rc_squared"):
            raise ValueError(f"unknown weighting kind {self.kind!r}")
        if self.kind == "rc_squared":
            if self.omega_c <= 0:
                raise ValueError("omega_c must be positive")
            if not (0.0 <= self.roll_off <= 1.0):
                raise ValueError("roll_off must lie in [0, 1]")

    def values(self, omega) -> NDArray[np.float64]:
        omega = np.asarray(omega, dtype=float)
        if self.kind == "uniform":
            return np.ones_like(omega)
        a = np.abs(omega)
        lo = self.omega_c * (1.0 - self.roll_off)
        hi = self.omega_c * (1.0 + self.roll_off)
        w = np.zeros_like(a)
        w[a <= lo] = 1.0
        mid = (a > lo) & (a < hi)
        if np.any(mid):
            w[mid] = 0.5 * (1.0 + np.cos(np.pi * (a[mid] - lo) / (hi - lo)))
        return w


@dataclass(frozen=True)
class SubbandSpec:
    """Constants of one band's design problem.

    band : DFT band index k in [0, M).
    k_signed : signed center index (k for k <= M/2, else k - M).
    alpha_sub : dispersion coefficient on the decimated axis.
    delay_offset : integer delay added to the ideal group delay.
    n_sections : all-pass section count from the delay-area identity.
    """

    band: int
    k_signed: int
    alpha_sub: float
    delay_offset: int
    n_sections: int

    def __post_init__(self) -> None:
        if self.alpha_sub < 0 or self.n_sections < 0 or self.delay_offset < 0:
            raise ValueError("alpha_sub, delay_offset and n_sections must be >= 0")


def subband_spec(alpha: float, m_bands: int, band: int) -> SubbandSpec:
    """Design constants for band ``band`` of an M-band bank."""
    if alpha < 0 or not np.isfinite(alpha):
        raise ValueError("alpha must be finite and nonnegative")
    if m_bands < 2 or m_bands % 2 != 0:
        raise ValueError("m_bands must be even and >= 2")
    if not (0 <= band < m_bands):
        raise ValueError(f"band must lie in [0, {m_bands}), got {band}")
    k_signed = band if band <= m_bands // 2 else band - m_bands
    alpha_sub = alpha * (2.0 / m_bands) ** 2
    delay_offset = max(int(math.ceil(2.0 * alpha_sub * (m_bands / 2.0) * np.pi)), 0)
    n_raw = -2.0 * np.pi * alpha_sub * k_signed + delay_offset
    n_sections = max(int(math.ceil(n_raw)), 0)
    return SubbandSpec(band=band, k_signed=k_signed, alpha_sub=alpha_sub,
                       delay_offset=delay_offset, n_sections=n_sections)


def fullband_spec(alpha: float) -> SubbandSpec:
    """Single-band baseline: the whole rate treated as one band (M = 2)."""
    return subband_spec(alpha, 2, 0)


def desired_group_delay(spec: SubbandSpec, omega) -> NDArray[np.float64]:
    """Target group delay ``-2 alpha_sub (w + k' pi) + delay_offset``.

    May dip below zero near the outer edge of the extreme band
    (k' = M/2): the offset guarantees nonnegativity at band centers,
    not across the full decimated axis.
    """
    omega = np.asarray(omega, dtype=float)
    return -2.0 * spec.alpha_sub * (omega + spec.k_signed * np.pi) + spec.delay_offset


def desired_phase(spec: SubbandSpec, omega, phi0: float) -> NDArray[np.float64]:
    """Target phase whose negative derivative is :func:`desired_group_delay`."""
    omega = np.asarray(omega, dtype=float)
    u = omega + spec.k_signed * np.pi
    return spec.alpha_sub * u ** 2 - spec.delay_offset * u + phi0


# --- cost functions -------------------------------------------------------

def _params(sections) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    rho = np.array([s.rho for s in sections], dtype=float)
    theta = np.array([s.theta for s in sections], dtype=float)
    return rho, theta


def _gd_cost_arrays(rho, theta, spec, w_values, grid):
    omega = grid.omega
    tau_target = desired_group_delay(spec, omega)
    if rho.size:
        c = np.cos(omega[None, :] - theta[:, None])
        s = np.sin(omega[None, :] - theta[:, None])
        r = rho[:, None]
        denom = 1.0 + r * r - 2.0 * r * c
        tau = ((1.0 - r * r) / denom).sum(axis=0)
    else:
        tau = np.zeros_like(omega)
    err = tau_target - tau
    cost = grid.integrate(w_values * err * err)
    if not rho.size:
        return cost, np.zeros(0), np.zeros(0)
    dtau_drho = 2.0 * (c * (1.0 + r * r) - 2.0 * r) / denom ** 2
    dtau_dtheta = 2.0 * r * (1.0 - r * r) * s / denom ** 2
    common = -2.0 * w_values * err * grid.spacing
    grad_rho = (common[None, :] * dtau_drho).sum(axis=1)
    grad_theta = (common[None, :] * dtau_dtheta).sum(axis=1)
    return cost, grad_rho, grad_theta


def gd_cost(sections, spec: SubbandSpec, weighting: WeightingSpec,
            grid: FrequencyGrid) -> tuple[float, NDArray[np.float64]]:
    """Weighted group-delay MSE and its gradient.

    The gradient is ordered ``[d/d rho_1..N, d/d theta_1..N]``.
    """
    rho, theta = _params(sections)
    w_values = weighting.values(grid.omega)
    cost, g_rho, g_theta = _gd_cost_arrays(rho, theta, spec, w_values, grid)
    return cost, np.concatenate([g_rho, g_theta])


def _phase_error_arrays(rho, theta, phi0, spec, grid):
    omega = grid.omega
    u = omega + spec.k_signed * np.pi
    phase = phi0 + spec.delay_offset * (omega - spec.k_signed * np.pi) \
        - spec.alpha_sub * u ** 2
    if rho.size:
        c = np.cos(omega[None, :] - theta[:, None])
        s = np.sin(omega[None, :] - theta[:, None])
        r = rho[:, None]
        phase = phase + (-omega[None, :]
                         + 2.0 * np.arctan2(-r * s, 1.0 - r * c)).sum(axis=0)
        return phase, c, s, r
    return phase, None, None, None


def _phase_cost_arrays(rho, theta, phi0, spec, w_values, grid):
    phase_err, c, s, r = _phase_error_arrays(rho, theta, phi0, spec, grid)
    cost = grid.integrate(w_values * 2.0 * (1.0 - np.cos(phase_err)))
    common = 2.0 * w_values * np.sin(phase_err) * grid.spacing
    grad_phi0 = float(np.sum(common))
    if not rho.size:
        return cost, np.zeros(0), np.zeros(0), grad_phi0
    denom = 1.0 + r * r - 2.0 * r * c
    grad_rho = (common[None, :] * (-2.0 * s / denom)).sum(axis=1)
    grad_theta = (common[None, :] * (2.0 * r * (c - r) / denom)).sum(axis=1)
    return cost, grad_rho, grad_theta, grad_phi0


def phase_cost(sections, phi0: float, spec: SubbandSpec,
               weighting: WeightingSpec, grid: FrequencyGrid
               ) -> tuple[float, NDArray[np.float64]]:
    """Weighted phase-transfer MSE ``int W |Y|^2`` and its gradient.

    ``Y`` is the unit-modulus product of the section cascade, the band's
    channel response and the target derotation minus one, so the cost
    equals ``int W * 2 (1 - cos(phase error))``.  Gradient ordering is
    ``[d/d rho, d/d theta, d/d phi0]``.
    """
    rho, theta = _params(sections)
    w_values = weighting.values(grid.omega)
    cost, g_rho, g_theta, g_phi0 = _phase_cost_arrays(
        rho, theta, phi0, spec, w_values, grid)
    return cost, np.concatenate([g_rho, g_theta, [g_phi0]])


def optimal_phi0(sections, spec: SubbandSpec, weighting: WeightingSpec,
                 grid: FrequencyGrid) -> float:
    """Closed-form minimizer of the phase-transfer MSE over ``phi0``."""
    rho, theta = _params(sections)
    w_values = weighting.values(grid.omega)
    phase, _, _, _ = _phase_error_arrays(rho, theta, 0.0, spec, grid)
    z = np.sum(w_values * np.exp(1j * phase)) * grid.spacing
    w_total = grid.integrate(w_values)
    if abs(z) <= 1e-12 * max(w_total, 1e-300):
        raise AmbiguousPhaseError("weighted phase integral is zero")
    return float(-np.angle(z))


# --- initialization -------------------------------------------------------

def delay_area_init(spec: SubbandSpec, grid: FrequencyGrid) -> list[AllpassSection]:
    """Pole placement by the delay-area method.

    The cumulative integral Phi of the (clipped) desired group delay is
    split into 2*pi slabs: section i owns the band where Phi crosses
    ``2 pi (i - 1/2)``, and its radius matches the slab's mean delay
    through the peak-delay relation ``rho = (tau - 1)/(tau + 1)``.
    """
    n = spec.n_sections
    if n < 1:
        raise ValueError("delay_area_init requires at least one section")
    omega = grid.omega
    tau = desired_group_delay(spec, omega)
    if np.all(tau <= 0.0):
        raise InfeasibleTargetError(
            "desired group delay is nonpositive on the whole grid")
    floor = 1e-12 * (1.0 + float(np.max(np.abs(tau))))
    tau_pos = np.maximum(tau, floor)
    tau_end = max(float(desired_group_delay(spec, np.array([np.pi]))[0]), floor)
    nodes = np.append(omega, np.pi)
    values = np.append(tau_pos, tau_end)
    steps = np.diff(nodes) * (values[1:] + values[:-1]) / 2.0
    phi = np.concatenate([[0.0], np.cumsum(steps)])
    area = phi[-1]
    edge_targets = np.clip(2.0 * np.pi * np.arange(n + 1), 0.0, area)
    angle_targets = np.clip(2.0 * np.pi * (np.arange(n) + 0.5), 0.0, area)
    edges = np.interp(edge_targets, phi, nodes)
    angles = np.interp(angle_targets, phi, nodes)
    widths = np.diff(edges)
    seg_areas = np.diff(edge_targets)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau_bar = np.where(widths > 0, seg_areas / np.maximum(widths, 1e-30), 1.0)
    rho = np.clip((tau_bar - 1.0) / (tau_bar + 1.0), 0.0, RHO_MAX)
    return [AllpassSection(rho=float(r), theta=normalize_angle(float(a)))
            for r, a in zip(rho, angles)]


# --- staged design --------------------------------------------------------

def _to_logit(rho: NDArray[np.float64]) -> NDArray[np.float64]:
    p = np.clip(rho / RHO_MAX, _RHO_FLOOR, 1.0 - 1e-9)
    return np.log(p / (1.0 - p))


def _from_logit(u: NDArray[np.float64]) -> NDArray[np.float64]:
    return RHO_MAX * expit(u)


@dataclass(frozen=True)
class BandReport:
    """Costs at the stage boundaries of one band's design."""

    spec: SubbandSpec
    gd_cost_initial: float
    gd_cost_final: float
    phase_cost_initial: float
    phase_cost_final: float
    phi0: float
    psi: float
    gd_iterations: int = 0
    phase_iterations: int = 0


@dataclass(frozen=True)
class BandDesign:
    """One band's equalizer: the cascade plus its alignment phase.

    ``cascade.phi0`` is set to ``-psi`` so that streaming the cascade
    applies the band's output derotation in the same pass.
    """

    cascade: AllpassCascade
    psi: float
    spec: SubbandSpec
    report: BandReport


def _band_psi(phi0: float, spec: SubbandSpec) -> float:
    return normalize_angle(phi0 - spec.delay_offset * spec.k_signed * np.pi)


def design_band(spec: SubbandSpec, weighting: WeightingSpec,
                grid: FrequencyGrid,
                settings: OptimizerSettings | None = None) -> BandDesign:
    """Run the four design stages for one band.

    Costs are monotone across stages; the returned cascade satisfies
    ``rho <= RHO_MAX`` by construction.
    """
    if settings is None:
        settings = OptimizerSettings()
    w_values = weighting.values(grid.omega)

    if spec.n_sections == 0:
        phi0 = optimal_phi0([], spec, weighting, grid)
        cost = _phase_cost_arrays(np.zeros(0), np.zeros(0), phi0, spec,
                                  w_values, grid)[0]
        gd0 = _gd_cost_arrays(np.zeros(0), np.zeros(0), spec, w_values, grid)[0]
        psi = _band_psi(phi0, spec)
        cascade = AllpassCascade(sections=(), phi0=-psi, band=spec.band)
        report = BandReport(spec=spec, gd_cost_initial=gd0, gd_cost_final=gd0,
                            phase_cost_initial=cost, phase_cost_final=cost,
                            phi0=phi0, psi=psi)
        return BandDesign(cascade=cascade, psi=psi, spec=spec, report=report)

    sections0 = delay_area_init(spec, grid)
    rho0, theta0 = _params(sections0)
    n = spec.n_sections

    def gd_objective(x):
        rho = _from_logit(x[:n])
        cost, g_rho, g_theta = _gd_cost_arrays(rho, x[n:], spec, w_values, grid)
        g_u = g_rho * rho * (1.0 - rho / RHO_MAX)
        return cost, np.concatenate([g_u, g_theta])

    x0 = np.concatenate([_to_logit(rho0), theta0])
    try:
        x1, gd_report = minimize(gd_objective, x0, settings)
    except DivergenceError as exc:
        raise DesignFailureError("group_delay", spec.band, exc) from exc
    gd_initial, gd_final = gd_report.initial_cost, gd_report.final_cost
    rho1, theta1 = _from_logit(x1[:n]), x1[n:]
    sections1 = [AllpassSection(float(r), normalize_angle(float(t)))
                 for r, t in zip(rho1, theta1)]

    phi0_init = optimal_phi0(sections1, spec, weighting, grid)

    def phase_objective(x):
        rho = _from_logit(x[:n])
        cost, g_rho, g_theta, g_phi0 = _phase_cost_arrays(
            rho, x[n:2 * n], x[-1], spec, w_values, grid)
        g_u = g_rho * rho * (1.0 - rho / RHO_MAX)
        return cost, np.concatenate([g_u, g_theta, [g_phi0]])

    x0p = np.concatenate([x1, [phi0_init]])
    try:
        x2, phase_report = minimize(phase_objective, x0p, settings)
    except DivergenceError as exc:
        raise DesignFailureError("phase_transfer", spec.band, exc) from exc
    phase_initial, phase_final = phase_report.initial_cost, phase_report.final_cost
    rho2, theta2, phi0 = _from_logit(x2[:n]), x2[n:2 * n], float(x2[-1])

    psi = _band_psi(phi0, spec)
    sections = tuple(AllpassSection(float(r), normalize_angle(float(t)))
                     for r, t in zip(rho2, theta2))
    cascade = AllpassCascade(sections=sections, phi0=-psi, band=spec.band)
    report = BandReport(spec=spec,
                        gd_cost_initial=gd_initial, gd_cost_final=gd_final,
                        phase_cost_initial=phase_initial,
                        phase_cost_final=phase_final,
                        phi0=phi0, psi=psi,
                        gd_iterations=gd_report.iterations,
                        phase_iterations=phase_report.iterations)
    return BandDesign(cascade=cascade, psi=psi, spec=spec, report=report)


@dataclass(frozen=True)
class EqualizerDesign:
    """Designed cascades for all M bands of one link configuration."""

    alpha: float
    m_bands: int
    delay_offset: int
    bands: tuple[BandDesign, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bands", tuple(self.bands))
        if len(self.bands) != self.m_bands:
            raise ValueError("need one BandDesign per band")

    @property
    def total_sections(self) -> int:
        return sum(len(b.cascade) for b in self.bands)


def design_all_bands(alpha: float, fb_cfg: FilterBankConfig,
                     weighting: WeightingSpec, grid: FrequencyGrid,
                     settings: OptimizerSettings | None = None) -> EqualizerDesign:
    """Design every band of the bank; bands are independent problems."""
    bands = []
    for k in range(fb_cfg.m_bands):
        spec = subband_spec(alpha, fb_cfg.m_bands, k)
        bands.append(design_band(spec, weighting, grid, settings))
    delay_offset = bands[0].spec.delay_offset
    return EqualizerDesign(alpha=alpha, m_bands=fb_cfg.m_bands,
                           delay_offset=delay_offset, bands=tuple(bands))


# --- persistence ----------------------------------------------------------

_FORMAT = "cdeq-design-v1"
_FORMAT_BAND = "cdeq-band-v1"


def _f15(value: float) -> float:
    return float(f"{float(value):.15g}")


def design_to_dict(design: EqualizerDesign) -> dict:
    return {"format": _FORMAT, "alpha": _f15(design.alpha),
            "m_bands": design.m_bands, "delay_offset": design.delay_offset,
            "bands": [_band_record(b) for b in design.bands]}


def design_from_dict(data: dict) -> EqualizerDesign:
    if data.get("format") != _FORMAT:
        raise ValueError(f"unrecognized design format {data.get('format')!r}")
    bands = tuple(_band_from_record(record) for record in data["bands"])
    return EqualizerDesign(alpha=data["alpha"], m_bands=data["m_bands"],
                           delay_offset=data["delay_offset"], bands=bands)


def _band_record(band: BandDesign) -> dict:
    record = cascade_to_record(band.cascade, delay_offset=band.spec.delay_offset)
    record["psi"] = _f15(band.psi)
    record["spec"] = {
        "band": band.spec.band,
        "k_signed": band.spec.k_signed,
        "alpha_sub": _f15(band.spec.alpha_sub),
        "delay_offset": band.spec.delay_offset,
        "n_sections": band.spec.n_sections,
    }
    record["report"] = {
        "gd_cost_initial": _f15(band.report.gd_cost_initial),
        "gd_cost_final": _f15(band.report.gd_cost_final),
        "phase_cost_initial": _f15(band.report.phase_cost_initial),
        "phase_cost_final": _f15(band.report.phase_cost_final),
        "phi0": _f15(band.report.phi0),
        "psi": _f15(band.report.psi),
        "gd_iterations": band.report.gd_iterations,
        "phase_iterations": band.report.phase_iterations,
    }
    return record


def _band_from_record(record: dict) -> BandDesign:
    cascade = cascade_from_record(record)
    spec_d = record["spec"]
    spec = SubbandSpec(band=spec_d["band"], k_signed=spec_d["k_signed"],
                       alpha_sub=spec_d["alpha_sub"],
                       delay_offset=spec_d["delay_offset"],
                       n_sections=spec_d["n_sections"])
    rep = record["report"]
    report = BandReport(spec=spec,
                        gd_cost_initial=rep["gd_cost_initial"],
                        gd_cost_final=rep["gd_cost_final"],
                        phase_cost_initial=rep["phase_cost_initial"],
                        phase_cost_final=rep["phase_cost_final"],
                        phi0=rep["phi0"], psi=rep["psi"],
                        gd_iterations=rep["gd_iterations"],
                        phase_iterations=rep["phase_iterations"])
    return BandDesign(cascade=cascade, psi=record["psi"], spec=spec,
                      report=report)


def save_design(design: EqualizerDesign, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(design_to_dict(design), fh, indent=1)


def load_design(path) -> EqualizerDesign:
    with open(path, "r", encoding="utf-8") as fh:
        return design_from_dict(json.load(fh))


def save_band_design(band: BandDesign, path) -> None:
    data = {"format": _FORMAT_BAND, "band": _band_record(band)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)


def load_any_design(path):
    """Load either a multi-band or a single-band coefficient file."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("format") == _FORMAT:
        return design_from_dict(data)
    if data.get("format") == _FORMAT_BAND:
        return _band_from_record(data["band"])
    raise ValueError(f"unrecognized coefficient file format {data.get('format')!r}")
