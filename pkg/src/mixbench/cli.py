"""Command-line front end binding the bench into four workflows:

``budget``    cascade analysis of every configured chain
``scan``      loopback phase scan -> CSV, metrics report, figures
``calibrate`` LO nulling / sideband predistortion / scan-derived settings
``rbfit``     decay fit of a randomized-benchmarking CSV

Exit codes: 0 success, 1 validation failure, 2 convergence failure, 3 I/O
error.  All delimited and JSON outputs are byte-reproducible for fixed inputs
and seeds.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

from .blocks import BiasSetting, Predistorter
from .budget import budget_report
from .calibrate import (
    ConvergenceError,
    calibrate_from_scan,
    design_predistorter,
    null_lo_blackbox,
)
from .config import BenchConfig, ConfigError, load_bench_config, _parse_bias, _parse_predistorter
from .loopback import (
    if_drive_transfer,
    phase_scan,
    read_scan_csv,
    write_scan_csv,
)
from .metrics import (
    estimate_imbalance,
    linearity_report,
    measure_lo_leakage,
    measure_sideband_rejection,
)
from .rb import fit_decay, fit_report_dict, read_rb_csv


def _write_json(obj: dict, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _json_num(x: float) -> float | str:
    """JSON has no inf; the dBc sentinels serialize as strings."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _require_loopback(cfg: BenchConfig) -> None:
    if cfg.loopback is None:
        raise ConfigError("this command needs a 'loopback' section in the config")


def cmd_budget(args) -> int:
    cfg = load_bench_config(args.config)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    sections = []
    for name, chain in cfg.chains.items():
        level = (
            args.input_dbm
            if args.input_dbm is not None
            else cfg.budget_input_dbm.get(name, -30.0)
        )
        report = budget_report(chain, level)
        sections.append(f"[{name}]\n{report.format_text()}")
        print(
            f"{name}: gain {report.total_gain_db:+.2f} dB, NF {report.total_nf_db:.3f} dB, "
            f"output {report.output_dbm:+.2f} dBm"
            + (f", {len(report.warnings)} compression warning(s)" if report.warnings else "")
        )
        if not args.no_plot:
            from .plots import plot_budget_levels

            plot_budget_levels(report, outdir / f"budget_levels_{name}.png")
    report_path = outdir / "budget_report.txt"
    with open(report_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n\n".join(sections) + "\n")
    print(f"wrote {report_path}")
    return 0


def _apply_calibration_file(bench, path):
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    up = bench.up
    if "bias" in raw:
        up = dataclasses.replace(up, bias=_parse_bias(raw["bias"], f"{path}:bias"))
    if "predistorter" in raw:
        up = dataclasses.replace(
            up, predistorter=_parse_predistorter(raw["predistorter"], f"{path}:predistorter")
        )
    return dataclasses.replace(bench, up=up)


def cmd_scan(args) -> int:
    cfg = load_bench_config(args.config)
    _require_loopback(cfg)
    bench = cfg.loopback
    if args.calibration:
        bench = _apply_calibration_file(bench, args.calibration)
    lb_cfg = bench.config
    overrides = {}
    if args.points is not None:
        overrides["n_phase_points"] = args.points
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.readout is not None:
        overrides["readout"] = args.readout
    if overrides:
        try:
            lb_cfg = dataclasses.replace(lb_cfg, **overrides)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    scan = phase_scan(bench.up, bench.dn, lb_cfg)
    out_csv = Path(args.out)
    if out_csv.parent != Path(""):
        out_csv.parent.mkdir(parents=True, exist_ok=True)
    write_scan_csv(scan, out_csv)

    rep = linearity_report(scan)
    est = estimate_imbalance(scan)
    report = {
        "amp_linearity": rep.amp_linearity,
        "phase_linearity_rad": rep.phase_linearity,
        "if_freq_hz": rep.freq,
        "n_points": rep.n_points,
        "readout": lb_cfg.readout,
        "seed": lb_cfg.seed,
        "imbalance": {
            "mu_re": est.mu_hat.real,
            "mu_im": est.mu_hat.imag,
            "nu_re": est.nu_hat.real,
            "nu_im": est.nu_hat.imag,
            "c_re": est.c_hat.real,
            "c_im": est.c_hat.imag,
            "irr_dbc": _json_num(est.irr_dbc),
        },
        "diagnostics": {
            "dac_clips": scan.dac_clips,
            "adc_clips": scan.adc_clips,
            "amp_overdrive": scan.overdrive,
        },
    }
    if lb_cfg.readout == "single":
        report["imbalance"]["note"] = (
            "boxcar readout rejects image and carrier bins; use readout='folded' "
            "to characterize imbalance"
        )
    report_path = out_csv.with_name(out_csv.stem + "_report.json")
    _write_json(report, report_path)

    if not args.no_plot:
        from .plots import plot_scan_iq, plot_scan_response

        plot_scan_iq(scan, out_csv.with_name(out_csv.stem + "_iq.png"))
        plot_scan_response(scan, out_csv.with_name(out_csv.stem + "_response.png"))

    print(
        f"scan: {rep.n_points} points, amp linearity {rep.amp_linearity:.3e}, "
        f"phase linearity {rep.phase_linearity:.3e} rad ({lb_cfg.readout} readout)"
    )
    print(f"wrote {out_csv} and {report_path}")
    return 0


def _bias_dict(bias: BiasSetting) -> dict:
    return {"b_i_v": bias.b_i, "b_q_v": bias.b_q, "limit_v": bias.limit_v}


def _predistorter_dict(pre: Predistorter) -> dict:
    return {"t": [[float(x) for x in row] for row in pre.matrix]}


def cmd_calibrate(args) -> int:
    cfg = load_bench_config(args.config)
    settings: dict = {"mode": args.mode}
    converged = True

    if args.mode == "from-scan":
        if not args.scan:
            raise ConfigError("--scan CSV is required for --mode from-scan")
        scan = read_scan_csv(args.scan)
        if cfg.loopback is not None:
            drive = if_drive_transfer(cfg.loopback.up, cfg.loopback.config)
        else:
            raise ConfigError(
                "from-scan needs the loopback section to scale the bias "
                "(mixer drive amplitude)"
            )
        cal = calibrate_from_scan(scan, mixer_drive=drive)
        settings.update(
            {
                "bias": _bias_dict(cal.bias),
                "predistorter": _predistorter_dict(cal.predistorter),
                "attribution": cal.attribution,
                "estimated_irr_dbc": _json_num(
                    20.0 * math.log10(abs(cal.estimate_mu) / abs(cal.estimate_nu))
                    if cal.estimate_nu != 0
                    else math.inf
                ),
            }
        )
        print(
            f"from-scan: bias ({cal.bias.b_i:.6g}, {cal.bias.b_q:.6g}) V, "
            f"|nu/mu| estimate {abs(cal.estimate_nu / cal.estimate_mu):.3e}"
        )
    elif args.mode == "lo-null":
        _require_loopback(cfg)
        up = cfg.loopback.up
        before = measure_lo_leakage(up, up.bias, cfg.probe, cfg.probe_tone)
        result = null_lo_blackbox(up, cfg.probe, cfg.optimizer, cfg.probe_tone)
        settings.update(
            {
                "bias": _bias_dict(result.bias),
                "before_dbc": _json_num(before),
                "after_dbc": _json_num(result.best_dbc),
                "evaluations": result.evaluations,
                "converged": result.converged,
            }
        )
        print(
            f"lo-null: {before:.1f} dBc -> {result.best_dbc:.1f} dBc "
            f"in {result.evaluations} evaluations"
        )
        converged = result.converged
    elif args.mode == "sideband":
        _require_loopback(cfg)
        up = cfg.loopback.up
        before = measure_sideband_rejection(up, cfg.probe_tone, cfg.probe)
        design = design_predistorter(up.mixer)
        corrected = dataclasses.replace(up, predistorter=design.predistorter)
        after = measure_sideband_rejection(corrected, cfg.probe_tone, cfg.probe)
        settings.update(
            {
                "predistorter": _predistorter_dict(design.predistorter),
                "before_dbc": _json_num(before),
                "after_dbc": _json_num(after),
            }
        )
        before_s = f"{before:.1f}" if math.isfinite(before) else "inf"
        after_s = f"{after:.1f}" if math.isfinite(after) else "inf"
        print(f"sideband: {before_s} dBc -> {after_s} dBc")
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown mode {args.mode!r}")

    _write_json(settings, args.out)
    print(f"wrote {args.out}")
    if not converged:
        print("calibration did not reach tolerance", file=sys.stderr)
        return 2
    return 0


def cmd_rbfit(args) -> int:
    data = read_rb_csv(args.data, dimension=args.dimension)
    fit = fit_decay(data)
    report = fit_report_dict(data, fit)
    _write_json(report, args.out)
    if not args.no_plot:
        from .plots import plot_rb_fit

        plot_rb_fit(data, fit, Path(args.out).with_suffix(".png"))
    print(
        f"rbfit: d={fit.dimension}, A={fit.a:.6g}, p={fit.p:.8g}, "
        f"process infidelity {fit.infidelity:.4g} +/- {fit.infidelity_stderr:.2g} "
        f"({fit.status})"
    )
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixbench",
        description="Virtual test bench for heterodyne RF mixing modules",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("budget", help="cascade gain/NF/IIP3 analysis of each chain")
    p.add_argument("config", help="bench config JSON")
    p.add_argument("--input-dbm", type=float, default=None, help="override input level for all chains")
    p.add_argument("--outdir", default=".", help="output directory (default: .)")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("scan", help="loopback phase scan with linearity metrics")
    p.add_argument("config", help="bench config JSON")
    p.add_argument("--points", type=int, default=None, help="override phase point count")
    p.add_argument("--seed", type=int, default=None, help="override noise seed")
    p.add_argument("--readout", choices=["folded", "single"], default=None,
                   help="override accumulator readout mode")
    p.add_argument("--calibration", default=None,
                   help="settings JSON from 'calibrate' to apply to the up converter")
    p.add_argument("--out", default="scan.csv", help="scan CSV path (default: scan.csv)")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("calibrate", help="derive nulling bias and/or predistortion settings")
    p.add_argument("config", help="bench config JSON")
    p.add_argument("--mode", required=True, choices=["lo-null", "sideband", "from-scan"])
    p.add_argument("--scan", default=None, help="scan CSV (required for from-scan)")
    p.add_argument("--out", default="calibration.json", help="settings file path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("rbfit", help="fit A*p^m decay to a benchmarking CSV")
    p.add_argument("data", help="CSV with columns m,survival,shots")
    p.add_argument("--dimension", type=int, choices=[2, 4], default=2,
                   help="system dimension: 2 (single qubit) or 4 (two qubits)")
    p.add_argument("--out", default="rb_fit.json", help="fit report path")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_rbfit)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
