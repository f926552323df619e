"""Command-line front end.

Subcommands:

  design       design an equalizer and write the coefficient file
  simulate     run the Monte-Carlo link and write CSV/JSON results
  complexity   print the multiplication-count comparison
  fb-selftest  filter-bank reconstruction and band-centering checks

Link parameters can come from flags or from a flat key-value config file
(``key = value`` per line, ``#`` comments); flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .design import (FrequencyGrid, WeightingSpec, design_all_bands,
                     design_band, fullband_spec, load_any_design,
                     save_band_design, save_design)
from .filterbank import (FilterBankConfig, band_isolation_db, design_rrc,
                         reconstruction_nmse)
from .linksim import (LinkConfig, complexity_report, config_summary, run_link,
                      write_ber_csv)

_LINK_KEYS = {
    "baud": float,
    "lambda0": float,
    "dispersion_ps_nm_km": float,
    "length": float,
    "m_bands": int,
    "length_factor": int,
    "prototype_roll_off": float,
    "equalizer": str,
    "snr_db": str,
    "n_symbols": int,
    "n_pilots": int,
    "tx_roll_off": float,
    "grid_points": int,
    "weighting_kind": str,
    "weighting_omega_c": float,
    "weighting_roll_off": float,
    "seed": int,
}


def _add_link_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key-value config file")
    parser.add_argument("--baud", type=float, help="symbol rate (default 28e9)")
    parser.add_argument("--lambda0", type=float, help="wavelength in m")
    parser.add_argument("--dispersion-ps-nm-km", type=float,
                        help="fiber dispersion D in ps/nm/km")
    parser.add_argument("--length", type=float, help="fiber length in m")
    parser.add_argument("--m-bands", type=int, help="number of sub-bands M")
    parser.add_argument("--length-factor", type=int,
                        help="prototype length factor K (taps = K*M)")
    parser.add_argument("--prototype-roll-off", type=float,
                        help="prototype RRC roll-off")
    parser.add_argument("--equalizer", choices=("none", "fullband_iir", "fb_iir"))
    parser.add_argument("--snr-db", help="comma-separated Es/N0 list in dB")
    parser.add_argument("--n-symbols", type=int)
    parser.add_argument("--n-pilots", type=int)
    parser.add_argument("--tx-roll-off", type=float)
    parser.add_argument("--grid-points", type=int)
    parser.add_argument("--weighting-kind", choices=("uniform", "rc_squared"))
    parser.add_argument("--weighting-omega-c", type=float,
                        help="weighting cutoff in rad (sub-band axis)")
    parser.add_argument("--weighting-roll-off", type=float)


def _read_config_file(path: str) -> dict:
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SystemExit(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _LINK_KEYS:
                raise SystemExit(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _LINK_KEYS[key](value)
    return values


def _parse_snr_list(text) -> tuple[float, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(part) for part in str(text).split(",") if part.strip())


def _build_link_config(args, require_seed: bool) -> LinkConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(_read_config_file(args.config))
    for key in _LINK_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    weighting = WeightingSpec(
        kind=values.pop("weighting_kind", "rc_squared"),
        omega_c=values.pop("weighting_omega_c", 0.6 * np.pi),
        roll_off=values.pop("weighting_roll_off", 0.1))
    if "snr_db" in values:
        values["snr_db"] = _parse_snr_list(values["snr_db"])
    if require_seed and values.get("seed") is None:
        raise SystemExit("simulate requires --seed (reproducibility)")
    values.setdefault("seed", 0)
    return LinkConfig(weighting=weighting, **values)


def _cmd_design(args) -> int:
    config = _build_link_config(args, require_seed=False)
    alpha = config.channel().alpha
    grid = FrequencyGrid(config.grid_points)
    mode = args.mode or config.equalizer
    if mode == "none":
        raise SystemExit("nothing to design for equalizer mode 'none'")
    if mode == "fullband_iir":
        band = design_band(fullband_spec(alpha), config.weighting, grid)
        save_band_design(band, args.output)
        print(f"full-band design: {band.spec.n_sections} sections, "
              f"final phase cost {band.report.phase_cost_final:.3e} "
              f"-> {args.output}")
    else:
        fb_cfg = FilterBankConfig(config.m_bands, config.length_factor)
        design = design_all_bands(alpha, fb_cfg, config.weighting, grid)
        save_design(design, args.output)
        print(f"filter-bank design: {design.m_bands} bands, "
              f"{design.total_sections} sections total -> {args.output}")
    return 0


def _cmd_simulate(args) -> int:
    config = _build_link_config(args, require_seed=True)
    equalizer = load_any_design(args.coeff_file) if args.coeff_file else None
    points = run_link(config, equalizer)
    for p in points:
        print(f"snr {p.snr_db:6.2f} dB   bits {p.bits}   errors {p.errors}   "
              f"ber {p.ber:.3e}")
    if args.output_csv:
        write_ber_csv(points, args.output_csv)
    if args.output_json:
        summary = config_summary(config)
        summary["ber"] = [{"snr_db": p.snr_db, "bits": p.bits,
                           "errors": p.errors, "ber": p.ber} for p in points]
        if equalizer is None and config.equalizer == "fb_iir":
            pass  # design happened inside run_link; re-run `design` to inspect it
        with open(args.output_json, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=1)
    return 0


def _cmd_complexity(args) -> int:
    if args.n_iir is not None:
        n_iir = args.n_iir
    else:
        config = _build_link_config(args, require_seed=False)
        n_iir = fullband_spec(config.channel().alpha).n_sections
    config = _build_link_config(args, require_seed=False)
    report = complexity_report(n_iir, config.m_bands, config.length_factor)
    print(f"N_IIR      = {report.n_iir}")
    print(f"C_IIR      = {report.c_iir:.1f} real mults/sample")
    print(f"C_FB+IIR   = {report.c_fb_iir:.1f} real mults/sample "
          f"(M={report.m_bands}, K={report.length_factor})")
    print(f"M_opt      = {report.m_opt:.1f}")
    print(f"C_opt      = {report.c_opt:.1f} real mults/sample")
    return 0


def _cmd_fb_selftest(args) -> int:
    config = _build_link_config(args, require_seed=False)
    cfg = FilterBankConfig(config.m_bands, config.length_factor)
    proto = design_rrc(config.m_bands, config.length_factor,
                       config.prototype_roll_off)
    nmse = reconstruction_nmse(cfg, proto)
    ok_pr = nmse <= -30.0
    print(f"near-PR reconstruction NMSE: {nmse:.1f} dB "
          f"(target <= -30.0 dB) {'PASS' if ok_pr else 'FAIL'}")
    probe_band = min(5, cfg.m_bands - 1)
    iso = band_isolation_db(cfg, proto, probe_band)
    non_adjacent = np.delete(
        iso, [(probe_band - 1) % cfg.m_bands, probe_band,
              (probe_band + 1) % cfg.m_bands])
    worst = float(np.max(non_adjacent))
    ok_iso = worst <= -40.0
    print(f"band-centering leakage (band {probe_band}): worst non-adjacent "
          f"{worst:.1f} dB (target <= -40.0 dB) {'PASS' if ok_iso else 'FAIL'}")
    return 0 if (ok_pr and ok_iso) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cdeq",
        description="Dispersion equalization design toolkit and link simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="design and save an equalizer")
    _add_link_arguments(p_design)
    p_design.add_argument("--mode", choices=("fullband_iir", "fb_iir"),
                          help="override the equalizer mode for the design")
    p_design.add_argument("--output", required=True,
                          help="coefficient file to write (JSON)")
    p_design.set_defaults(fn=_cmd_design)

    p_sim = sub.add_parser("simulate", help="run the Monte-Carlo link")
    _add_link_arguments(p_sim)
    p_sim.add_argument("--seed", type=int, help="random seed (required)")
    p_sim.add_argument("--coeff-file", help="reuse a saved design")
    p_sim.add_argument("--output-csv", help="BER table destination")
    p_sim.add_argument("--output-json", help="summary destination")
    p_sim.set_defaults(fn=_cmd_simulate)

    p_cx = sub.add_parser("complexity", help="print the complexity report")
    _add_link_arguments(p_cx)
    p_cx.add_argument("--n-iir", type=int,
                      help="section count (default: derived from link flags)")
    p_cx.set_defaults(fn=_cmd_complexity)

    p_fb = sub.add_parser("fb-selftest",
                          help="filter-bank reconstruction / centering checks")
    _add_link_arguments(p_fb)
    p_fb.set_defaults(fn=_cmd_fb_selftest)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
