"""Command-line interface.

Subcommands: plan, simulate, sweep, analyze, response. Exit codes:
0 success, 2 configuration error, 3 runtime/DSP error. The NSCM_WORKERS
environment variable sets sweep parallelism.
"""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .errors import ConfigError, NscmError
from .experiment import (
    CSV_FIELDS,
    ExperimentConfig,
    build_plan,
    cells_to_csv_rows,
    run_experiment,
    sweep,
)
from .linksim import analytic_fading, analytic_frontend, probe_response
from .metrics import symbol_pdf
from .planner import plan_rate
from .rxchain import BandRxConfig, band_receive
from .transmitter import make_modems
from .wavio import read_waveform, write_waveform


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig.from_dict({})
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    return cfg


def _outdir(args) -> str:
    out = args.out or "out"
    os.makedirs(out, exist_ok=True)
    return out


def cmd_plan(args) -> int:
    cfg = _load_config(args)
    info = build_plan(cfg)
    rate = plan_rate(info.plan, cfg.raw["fec_overhead"], cfg.raw["frame"]["ccdm_block"])
    print(f"dispersion nulls (GHz): {np.round(info.nulls / 1e9, 3).tolist()}")
    print(f"{'band':>4} {'center GHz':>11} {'baud GBd':>9} {'mod':>9} "
          f"{'H':>5} {'snr est dB':>10}")
    for i, (band, snr) in enumerate(zip(info.plan.bands, info.snr.snr_db)):
        mod = band.modulation
        print(
            f"{i:>4} {band.center / 1e9:>11.3f} {band.baud / 1e9:>9.3f} "
            f"{(mod.kind if mod else '-'):>9} "
            f"{(f'{mod.entropy:.2f}' if mod else '-'):>5} {snr:>10.1f}"
        )
    print(f"gross {rate.gross_bps / 1e9:.2f} Gb/s, net {rate.net_bps / 1e9:.2f} Gb/s "
          f"(FEC overhead {rate.fec_overhead:.0%})")
    if args.out:
        out = _outdir(args)
        doc = {
            "nulls_hz": info.nulls.tolist(),
            "snr_est_db": list(info.snr.snr_db),
            "gross_bps": rate.gross_bps,
            "net_bps": rate.net_bps,
            "bands": [
                {
                    "center_ghz": b.center / 1e9,
                    "baud_gbd": b.baud / 1e9,
                    "rolloff": b.rolloff,
                    "modulation": b.modulation.kind if b.modulation else None,
                    "entropy": b.modulation.entropy if b.modulation else None,
                }
                for b in info.plan.bands
            ],
        }
        path = os.path.join(out, "plan.json")
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
        print(f"wrote {path}")
    return 0


def _write_report(report, out, fmt):
    paths = []
    if fmt in ("json", "both"):
        path = os.path.join(out, "report.json")
        with open(path, "w") as fh:
            fh.write(report.to_json())
        paths.append(path)
    if fmt in ("csv", "both"):
        path = os.path.join(out, "report.csv")
        rows = report.csv_rows(extra={"axis": "", "value": ""})
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            writer.writeheader()
            writer.writerows(rows)
        paths.append(path)
    return paths


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    report, artifacts = run_experiment(cfg, keep_artifacts=args.dump_waveforms)
    print(
        f"seed={report.seed} CR={report.cr_db} dB ROP={report.rop_dbm} dBm: "
        f"BER={report.ber_aggregate:.3e} NGMI(rate-weighted)={report.ngmi_rate_weighted:.4f} "
        f"net={report.net_bps / 1e9:.2f} Gb/s "
        f"capacity-reach={report.capacity_reach_bps_km / 1e12:.2f} Tb/s*km"
    )
    out = _outdir(args)
    for path in _write_report(report, out, args.format):
        print(f"wrote {path}")
    if args.dump_waveforms:
        cap = os.path.join(out, "capture.nscm")
        write_waveform(artifacts.capture, cap)
        comp = os.path.join(out, "composite.nscm")
        write_waveform(artifacts.composite, comp)
        print(f"wrote {cap}\nwrote {comp}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    sw = cfg.raw.get("sweep")
    axis = args.axis or (sw or {}).get("axis")
    if axis is None:
        raise ConfigError("no sweep axis: pass --axis or a 'sweep' config section")
    if args.values:
        values = [float(v) for v in args.values.split(",")]
    elif sw and sw.get("values"):
        values = sw["values"]
    else:
        raise ConfigError("no sweep values: pass --values or a 'sweep' config section")
    seeds = (sw or {}).get("seeds") or [cfg.raw["seed"]]
    cells = sweep(cfg, axis, values, seeds)
    out = _outdir(args)
    rows = cells_to_csv_rows(cells)
    if args.format in ("csv", "both"):
        path = os.path.join(out, f"sweep_{axis}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {path}")
    if args.format in ("json", "both"):
        path = os.path.join(out, f"sweep_{axis}.json")
        doc = [
            {
                "axis": c.axis,
                "value": c.value,
                "seed": c.seed,
                "error": c.error,
                "report": c.report.to_dict() if c.report else None,
            }
            for c in cells
        ]
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
        print(f"wrote {path}")
    for cell in cells:
        if cell.error:
            print(f"  {axis}={cell.value} seed={cell.seed}: ERROR {cell.error}")
        else:
            r = cell.report
            print(
                f"  {axis}={cell.value} seed={cell.seed}: BER={r.ber_aggregate:.3e} "
                f"NGMI={r.ngmi_rate_weighted:.4f} net={r.net_bps / 1e9:.1f}G"
            )
    return 0


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    capture = read_waveform(args.input)
    info = build_plan(cfg)
    modems, _ = make_modems(info.plan, cfg.frame_config(), cfg.link_config().dac.rate)
    modem = next((m for m in modems if m.index == args.band), None)
    if modem is None:
        raise ConfigError(f"band {args.band} is not an active band of the plan")
    rx = BandRxConfig(
        constellation=modem.constellation,
        preamble=modem.preamble(),
        n_payload=modem.n_payload,
        eq=cfg.eq_config(),
        rrc_span=cfg.raw["frame"]["rrc_span"],
        use_priors=cfg.raw["rx"]["use_priors"],
        band_index=modem.index,
    )
    result = band_receive(capture, modem.band, rx)
    print(
        f"band {modem.index}: sync offset={result.sync.offset} peak={result.sync.peak:.3f} "
        f"snr={result.snr_db:.2f} dB alpha={result.alpha:.3f} eq_mse={result.eq_mse:.3e}"
    )
    pdf = symbol_pdf(result.indices, modem.constellation)
    out = _outdir(args)
    path = os.path.join(out, f"band{modem.index}_pdf.json")
    with open(path, "w") as fh:
        json.dump(
            {
                "points_re": modem.constellation.points.real.tolist(),
                "points_im": modem.constellation.points.imag.tolist(),
                "probability": pdf.tolist(),
            },
            fh,
            sort_keys=True,
        )
    print(f"wrote {path}")
    return 0


def cmd_response(args) -> int:
    cfg = _load_config(args)
    link = cfg.link_config()
    f_lo, f_hi = 0.5e9, min(args.f_max_ghz * 1e9, link.adc.rate / 2 * 0.95)
    grid = np.linspace(f_lo, f_hi, args.points)
    probed = probe_response(link, grid)
    fading = analytic_fading(grid, link)
    frontend = analytic_frontend(grid, link)
    out = _outdir(args)
    path = os.path.join(out, "response.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["f_ghz", "probed_db", "analytic_fading_db", "analytic_frontend_db"])
        ref = probed.max()
        for f, p, fa, fe in zip(grid, probed, fading, frontend):
            writer.writerow(
                [
                    f / 1e9,
                    20 * math.log10(max(p / ref, 1e-12)),
                    20 * math.log10(max(fa, 1e-12)),
                    20 * math.log10(max(fe, 1e-12)),
                ]
            )
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nscm",
        description="Entropy-loaded multi-rate Nyquist-SCM link simulator",
    )
    parser.add_argument("--config", help="JSON experiment config", default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory (default ./out)")
    parser.add_argument(
        "--format", choices=["csv", "json", "both"], default="both", help="report format"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("plan", help="print the band plan and null map")

    p_sim = sub.add_parser("simulate", help="single run, emit report")
    p_sim.add_argument("--dump-waveforms", action="store_true")

    p_sweep = sub.add_parser("sweep", help="parameter sweep")
    p_sweep.add_argument("--axis", choices=["clipping", "rop", "rate"], default=None)
    p_sweep.add_argument("--values", default=None, help="comma-separated axis values")

    p_an = sub.add_parser("analyze", help="run the receiver on a stored waveform")
    p_an.add_argument("--input", required=True, help="waveform file (.nscm)")
    p_an.add_argument("--band", type=int, default=0)

    p_resp = sub.add_parser("response", help="emit probed + analytic channel response")
    p_resp.add_argument("--points", type=int, default=64)
    p_resp.add_argument("--f-max-ghz", type=float, default=36.0)

    return parser


COMMANDS = {
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "response": cmd_response,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NscmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
