"""Command-line surface: analyze, synth, roundtrip, export-pdap.

Exit codes: 0 ok, 2 parse, 3 calibration, 4 no signal, 5 rank deficient,
1 anything else. Errors are emitted as one JSON object on stderr. Output
files are written atomically (temp + rename) and only after the whole
command has succeeded, so a failing run leaves no partial outputs.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cir import compute_pdap, ctf_to_cir, write_pdap_csv
from .cluster import clusters_to_dict
from .errors import (
    CalibrationError,
    ChankitError,
    NoSignalError,
    ParseError,
    RankDeficientError,
)
from .extract import ThresholdPolicy, mpcs_to_dict
from .ingest import (
    CalibrationRecord,
    apply_system_response,
    calib_to_dict,
    calibrate,
    parse_calib_file,
    parse_sweep_file,
    sweep_to_dict,
)
from .model import Case, SystemConfig
from .pipeline import (
    AnalysisOptions,
    analyze_position,
    build_manifest,
    build_report,
    path_loss_samples,
    pooled_intervals_s,
    write_report_csv,
)
from .synth import (
    AntennaModel,
    StatGenParams,
    evaluate_retrieval,
    generate_statistical,
    parse_truth_file,
    render_sweep,
    truth_to_dict,
)

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_PARSE = 2
EXIT_CALIBRATION = 3
EXIT_NO_SIGNAL = 4
EXIT_RANK_DEFICIENT = 5

_ERROR_CODES = (
    (ParseError, EXIT_PARSE),
    (CalibrationError, EXIT_CALIBRATION),
    (NoSignalError, EXIT_NO_SIGNAL),
    (RankDeficientError, EXIT_RANK_DEFICIENT),
)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _atomic_write(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_bytes(path: Path, what: str) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {what} '{path}': {exc}") from exc


def _policy_from_args(args) -> ThresholdPolicy:
    if args.threshold_mode == "relative":
        return ThresholdPolicy.relative()
    if args.threshold_mode == "absolute":
        if args.threshold_db is None:
            raise ParseError("--threshold-mode absolute requires --threshold-db")
        return ThresholdPolicy.absolute(args.threshold_db)
    return ThresholdPolicy.dynamic_range(args.range_db)


def _add_policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold-mode", choices=["relative", "absolute", "range"],
                   default="relative", help="noise-cut rule (default: relative)")
    p.add_argument("--threshold-db", type=float, default=None,
                   help="fixed threshold level for absolute mode")
    p.add_argument("--range-db", type=float, default=30.0,
                   help="window below the peak for range mode (default: 30)")
    p.add_argument("--eps", type=float, default=0.2, help="clustering radius (default: 0.2)")
    p.add_argument("--min-pts", type=int, default=5, help="core-point neighbor count (default: 5)")
    p.add_argument("--xi", type=float, default=4.0, help="temporal weight of the component distance")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--f-start-ghz", type=float, default=306.0)
    p.add_argument("--f-stop-ghz", type=float, default=321.0)
    p.add_argument("--n-points", type=int, default=6001)
    p.add_argument("--az-step-deg", type=float, default=10.0)
    p.add_argument("--el-min-deg", type=float, default=-20.0)
    p.add_argument("--el-max-deg", type=float, default=20.0)
    p.add_argument("--el-step-deg", type=float, default=10.0)
    p.add_argument("--tx-gain-dbi", type=float, default=7.0)
    p.add_argument("--rx-gain-dbi", type=float, default=26.0)
    p.add_argument("--hpbw-deg", type=float, default=8.0)
    p.add_argument("--noise-floor-dbm", type=float, default=-180.0)


def _config_from_args(args) -> SystemConfig:
    az = tuple(np.arange(0.0, 360.0 + args.az_step_deg / 2, args.az_step_deg))
    el = tuple(np.arange(args.el_min_deg, args.el_max_deg + args.el_step_deg / 2, args.el_step_deg))
    return SystemConfig(
        f_start_hz=args.f_start_ghz * 1e9,
        f_stop_hz=args.f_stop_ghz * 1e9,
        n_points=args.n_points,
        tx_gain_dbi=args.tx_gain_dbi,
        rx_gain_dbi=args.rx_gain_dbi,
        rx_hpbw_deg=args.hpbw_deg,
        noise_floor_dbm=args.noise_floor_dbm,
        az_grid_deg=az,
        el_grid_deg=el,
    )


def cmd_analyze(args) -> int:
    out_dir = Path(args.out_dir)
    sweep_paths = [Path(p) for p in args.sweeps]
    calib_path = Path(args.calib)

    calib_bytes = _read_bytes(calib_path, "calibration file")
    sweeps = [parse_sweep_file(_read_bytes(p, "sweep file")) for p in sweep_paths]

    config = sweeps[0].config
    for s in sweeps[1:]:
        if s.config != config:
            raise ParseError(f"sweep '{s.position_id}' uses a different system config")
    ids = [s.position_id for s in sweeps]
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate position ids across sweep files")

    cal = parse_calib_file(calib_bytes, tx_gain_dbi=config.tx_gain_dbi, rx_gain_dbi=config.rx_gain_dbi)
    policy = _policy_from_args(args)
    f_hz = args.freq_ghz * 1e9 if args.freq_ghz is not None else config.center_frequency_hz
    options = AnalysisOptions(
        policy=policy, eps=args.eps, min_pts=args.min_pts, xi=args.xi,
        d0_m=args.d0, f_hz=f_hz, window=args.window,
    )

    keep_pdap = args.figures
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(lambda s: analyze_position(s, cal, options, keep_pdap=keep_pdap), sweeps))
    results.sort(key=lambda r: r.position_id)

    manifest = build_manifest([calib_path, *sweep_paths], options, seed=args.seed)
    report = build_report(results, options, manifest, f_hz)

    outputs: list[tuple[Path, object]] = [(out_dir / "report.json", _dump_json(report))]
    csv_buf = io.StringIO()
    write_report_csv(results, csv_buf)
    outputs.append((out_dir / "report.csv", csv_buf.getvalue()))
    for r in results:
        outputs.append((out_dir / "mpcs" / f"{r.position_id}.json",
                        _dump_json(mpcs_to_dict(r.position_id, r.mpcs))))
        outputs.append((out_dir / "clusters" / f"{r.position_id}.json",
                        _dump_json(clusters_to_dict(r.clustering, r.clusters))))

    for path, data in outputs:
        _atomic_write(path, data)

    if args.figures:
        _render_report_figures(out_dir / "figures", results, report, options, f_hz)
    print(str(out_dir / "report.json"))
    return EXIT_OK


def _render_report_figures(fig_dir: Path, results, report: dict, options: AnalysisOptions, f_hz: float) -> None:
    from . import figures  # deferred: keeps matplotlib out of figure-less runs

    fig_dir.mkdir(parents=True, exist_ok=True)
    samples = path_loss_samples(results)
    if samples:
        figures.save_path_loss_figure(
            samples, report["campaign"]["fits"], options.d0_m, f_hz, fig_dir / "path_loss.png"
        )
    intervals = {
        case.value: pooled_intervals_s(results, case) * 1e9 for case in Case
    }
    if any(v.size for v in intervals.values()):
        figures.save_interval_histogram(intervals, fig_dir / "cluster_intervals.png")
    for r in results:
        if r.pdap is not None:
            figures.save_pdap_heatmap(
                r.pdap, fig_dir / f"pdap_{r.position_id}.png",
                title=f"{r.position_id} ({r.case.value})", floor_db=r.threshold_db,
            )


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    config = _config_from_args(args)
    f_hz = args.freq_ghz * 1e9 if args.freq_ghz is not None else config.center_frequency_hz
    params = StatGenParams(
        mean_cluster_interval_s=args.mean_interval_ns * 1e-9,
        n_clusters_mean=args.n_clusters_mean,
        intra_cluster_count_mean=args.intra_count_mean,
        intra_toa_jitter_s=args.toa_jitter_ns * 1e-9,
        intra_angle_jitter_deg=args.angle_jitter_deg,
        ple=args.ple,
        seed=args.seed,
    )
    max_toa = 1.0 / config.freq_step_hz
    paths = generate_statistical(params, args.distance_m, f_hz, max_toa_s=max_toa * 0.95)
    case = Case(args.case)
    pattern = AntennaModel(hpbw_deg=config.rx_hpbw_deg, sidelobe_floor_db=args.sidelobe_floor_db)
    sweep = render_sweep(
        paths, config, pattern,
        position_id=args.position_id, case=case, tx_rx_distance_m=args.distance_m,
    )

    outputs = [(out_dir / "truth.json", _dump_json(truth_to_dict(paths)))]
    if args.raw:
        rng = np.random.Generator(np.random.Philox(args.seed))
        phase = rng.uniform(0.0, 2.0 * np.pi, config.n_points)
        cal = CalibrationRecord(
            s_calib=np.exp(1j * phase),
            attenuator_db=args.attenuator_db,
            tx_gain_dbi=config.tx_gain_dbi,
            rx_gain_dbi=config.rx_gain_dbi,
        )
        raw = apply_system_response(sweep, cal)
        outputs.append((out_dir / "sweep.json", _dump_json(sweep_to_dict(raw))))
        outputs.append((out_dir / "calib.json", _dump_json(calib_to_dict(cal))))
    else:
        outputs.append((out_dir / "sweep.json", _dump_json(sweep_to_dict(sweep))))

    for path, data in outputs:
        _atomic_write(path, data)
    print(str(out_dir / "sweep.json"))
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    truth = parse_truth_file(_read_bytes(Path(args.truth), "truth file"))
    sweep = parse_sweep_file(_read_bytes(Path(args.sweep), "sweep file"))
    if args.calib is not None:
        cal = parse_calib_file(
            _read_bytes(Path(args.calib), "calibration file"),
            tx_gain_dbi=sweep.config.tx_gain_dbi,
            rx_gain_dbi=sweep.config.rx_gain_dbi,
        )
        sweep = calibrate(sweep, cal)
    cir = ctf_to_cir(sweep, window=args.window)
    report = evaluate_retrieval(
        truth, cir, policy=_policy_from_args(args),
        eps=args.eps, min_pts=args.min_pts, xi=args.xi,
    )
    doc = {"schema": "roundtrip/1", "sweep": str(args.sweep), "truth": str(args.truth)}
    doc.update(report.to_dict())
    text = _dump_json(doc)
    if args.out is not None:
        _atomic_write(Path(args.out), text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_export_pdap(args) -> int:
    sweep = parse_sweep_file(_read_bytes(Path(args.sweep), "sweep file"))
    if args.calib is not None:
        cal = parse_calib_file(
            _read_bytes(Path(args.calib), "calibration file"),
            tx_gain_dbi=sweep.config.tx_gain_dbi,
            rx_gain_dbi=sweep.config.rx_gain_dbi,
        )
        sweep = calibrate(sweep, cal)
    cir = ctf_to_cir(sweep, window=args.window)
    if args.mode == "max":
        pdap = compute_pdap(cir, "max")
    else:
        pdap = compute_pdap(cir, "slice", el_idx=args.el_index)
    buf = io.StringIO()
    write_pdap_csv(pdap, buf)
    _atomic_write(Path(args.out), buf.getvalue())
    if args.fig is not None:
        from . import figures

        figures.save_pdap_heatmap(pdap, Path(args.fig), title=sweep.position_id)
    print(str(args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chankit",
        description="Post-process directional channel-sounding sweeps: extract "
        "multipath components, cluster them, fit path-loss models, and report "
        "dispersion statistics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="run the full pipeline over sweep files")
    p.add_argument("sweeps", nargs="+", metavar="SWEEP.json")
    p.add_argument("--calib", required=True, help="calibration file (calib/1)")
    p.add_argument("--out-dir", required=True)
    _add_policy_flags(p)
    p.add_argument("--d0", type=float, default=1.0, help="close-in reference distance [m]")
    p.add_argument("--freq-ghz", type=float, default=None,
                   help="frequency for FSPL anchoring (default: sweep center)")
    p.add_argument("--seed", type=int, default=None, help="echoed into the manifest")
    p.add_argument("--jobs", type=int, default=1, help="positions processed concurrently")
    p.add_argument("--window", choices=["rect", "hann"], default="rect")
    p.add_argument("--no-figures", dest="figures", action="store_false",
                   help="skip figure rendering")
    p.set_defaults(func=cmd_analyze, figures=True)

    p = sub.add_parser("synth", help="generate a synthetic sweep plus ground truth")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--distance-m", type=float, default=10.0)
    p.add_argument("--position-id", default="synthetic")
    p.add_argument("--case", choices=[c.value for c in Case], default="los")
    p.add_argument("--mean-interval-ns", type=float, default=37.15)
    p.add_argument("--n-clusters-mean", type=float, default=5.0)
    p.add_argument("--intra-count-mean", type=float, default=3.0)
    p.add_argument("--toa-jitter-ns", type=float, default=2.0)
    p.add_argument("--angle-jitter-deg", type=float, default=3.0)
    p.add_argument("--ple", type=float, default=2.0)
    p.add_argument("--freq-ghz", type=float, default=None)
    p.add_argument("--sidelobe-floor-db", type=float, default=-40.0,
                   help="hard sidelobe floor of the rendering pattern")
    p.add_argument("--raw", action="store_true",
                   help="emit a raw sweep plus matching calib.json instead of a "
                        "calibrated sweep")
    p.add_argument("--attenuator-db", type=float, default=-40.0)
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("roundtrip", help="score extraction against ground truth")
    p.add_argument("truth", metavar="TRUTH.json")
    p.add_argument("sweep", metavar="SWEEP.json")
    p.add_argument("--calib", default=None, help="calibrate the sweep first")
    p.add_argument("--out", default=None, help="also write the report to a file")
    p.add_argument("--window", choices=["rect", "hann"], default="rect")
    _add_policy_flags(p)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("export-pdap", help="export a power-delay-angular profile as CSV")
    p.add_argument("sweep", metavar="SWEEP.json")
    p.add_argument("--calib", default=None, help="calibrate the sweep first")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--mode", choices=["max", "slice"], default="max")
    p.add_argument("--el-index", type=int, default=0, help="elevation index for slice mode")
    p.add_argument("--fig", default=None, help="also render a heatmap PNG")
    p.add_argument("--window", choices=["rect", "hann"], default="rect")
    p.set_defaults(func=cmd_export_pdap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ChankitError as exc:
        code = EXIT_OTHER
        for klass, klass_code in _ERROR_CODES:
            if isinstance(exc, klass):
                code = klass_code
                break
        payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        sys.stderr.write(json.dumps(payload) + "\n")
        return code
    except ValueError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": EXIT_OTHER}
        sys.stderr.write(json.dumps(payload) + "\n")
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
