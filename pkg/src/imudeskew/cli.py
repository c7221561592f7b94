"""Command line: ``imudeskew {simulate,deskew,evaluate,compare}``.

Exit codes: 0 success, 2 usage, 3 invalid interval, 4 non-monotone timestamps,
5 IMU coverage gap, 6 cardinality mismatch, 7 unsupported rate, 8 config error,
9 file format error, 10 I/O error, 11 other invalid input.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .config import RunConfig
from .deskew import MODES, deskew, deskew_linear_baseline, evaluate, improvement_percentage, QUANTILES
from .exceptions import DeskewError, FormatError
from .simulation import generate_bundle

EXIT_IO = 10
EXIT_INVALID = 11
BUNDLE_FORMAT = "imudeskew-bundle v1"
DESKEW_FORMAT = "imudeskew-deskewed v1"
METHODS = ("proposed", "baseline")


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _simulate(cfg, seed=None):
    seed = cfg.seed if seed is None else seed
    return generate_bundle(
        cfg.trajectory.build(seed), cfg.environment(),
        rate=cfg.imu_rate, sweep_start=cfg.sweep_start, sweep_duration=cfg.sweep_duration,
        n_sweeps=cfg.n_sweeps, rays=cfg.rays, g=cfg.gravity, bias=cfg.bias, noise_std=cfg.noise_std,
        range_noise_std=cfg.range_noise_std, motion=cfg.motion, sampling=cfg.imu_sampling,
        sync=cfg.sync_policy, mode=cfg.deskew_mode, snap_rays=cfg.snap_rays,
    )


def _run_method(method, sweep, imu, anchor, cfg, mode):
    if method == "proposed":
        return deskew(sweep, imu, anchor, bias=cfg["bias"], sync=cfg["sync"], mode=mode, g=cfg["gravity"])
    return deskew_linear_baseline(sweep, imu, anchor, bias=cfg["bias"], mode=mode, g=cfg["gravity"])


def write_bundle(bundle, cfg, out, seed):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_imu(out / "imu.csv", bundle.imu)
    io.write_anchors(out / "anchors.csv", [s.index for s in bundle.sweeps], bundle.anchor_times, bundle.anchors)
    log = bundle.pose_log
    io.write_poses(out / "poses.csv", log["t"], log["R_wb"], log["position"])
    sweeps = []
    for sweep, truth in zip(bundle.sweeps, bundle.truths):
        name, tname = f"sweep_{sweep.index:04d}.csv", f"truth_{sweep.index:04d}.csv"
        io.write_sweep(out / name, sweep.t, sweep.points)
        io.write_sweep(out / tname, truth.t, truth.points)
        n_imu = int(np.count_nonzero((bundle.imu.t >= sweep.t_first) & (bundle.imu.t <= sweep.t_last)))
        sweeps.append({
            "index": sweep.index, "sweep": name, "truth": tname, "points": len(sweep),
            "t_first": sweep.t_first, "t_last": sweep.t_last, "sync_time": truth.sync_time,
            "imu_samples": n_imu,
        })
    files = sorted(p.name for p in out.iterdir() if p.suffix == ".csv")
    manifest = {
        "format": BUNDLE_FORMAT,
        "seed": seed,
        "gravity": cfg.gravity,
        "sync_policy": cfg.sync_policy,
        "deskew_mode": cfg.deskew_mode,
        "bias": {"accel": list(cfg.bias.accel), "gyro": list(cfg.bias.gyro)},
        "sweeps": sweeps,
        "files": {name: io.sha256(out / name) for name in files},
    }
    io.write_json(out / "manifest.json", manifest)
    return manifest


def read_bundle(path):
    """Load a bundle directory written by ``simulate``; returns ``(manifest, imu, sweeps, anchors)``."""
    path = Path(path)
    manifest = io.read_json(path / "manifest.json")
    if manifest.get("format") != BUNDLE_FORMAT:
        raise FormatError(f"unsupported bundle format {manifest.get('format')!r}", path / "manifest.json")
    imu = io.read_imu(path / "imu.csv")
    anchors = io.read_anchors(path / "anchors.csv")
    sweeps = []
    for entry in manifest["sweeps"]:
        sweeps.append(io.read_sweep(path / entry["sweep"], entry["index"]))
        if entry["index"] not in anchors:
            raise FormatError(f"no anchor for sweep {entry['index']}", path / "anchors.csv")
    return manifest, imu, sweeps, anchors


def cmd_simulate(args):
    cfg = _load_config(args)
    seed = cfg.seed
    bundle = _simulate(cfg, seed)
    out = Path(args.out or cfg.output_dir)
    manifest = write_bundle(bundle, cfg, out, seed)
    print(json.dumps(manifest, indent=2))
    return 0


def _settings(manifest, cfg):
    from .preintegration import ImuBias

    if cfg is not None:
        return {"gravity": cfg.gravity, "sync": cfg.sync_policy, "bias": cfg.bias, "mode": cfg.deskew_mode}
    b = manifest["bias"]
    return {"gravity": manifest["gravity"], "sync": manifest["sync_policy"],
            "bias": ImuBias(b["accel"], b["gyro"]), "mode": manifest["deskew_mode"]}


def cmd_deskew(args):
    cfg = _load_config(args) if args.config else None
    manifest, imu, sweeps, anchors = read_bundle(args.bundle)
    settings = _settings(manifest, cfg)
    mode = args.mode or settings["mode"]
    out = Path(args.out or "deskewed")
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for sweep in sweeps:
        _, anchor = anchors[sweep.index]
        result = _run_method(args.method, sweep, imu, anchor, settings, mode)
        name = f"deskewed_{sweep.index:04d}.csv"
        io.write_sweep(out / name, result.t, result.points)
        entries.append({"index": sweep.index, "file": name, "sync_time": result.sync_time,
                        "sha256": io.sha256(out / name)})
    io.write_json(out / "deskew.json", {"format": DESKEW_FORMAT, "method": args.method, "mode": mode,
                                        "sweeps": entries})
    print(f"wrote {len(entries)} de-skewed sweep(s) to {out}")
    return 0


def _pairs(deskewed, truth):
    deskewed, truth = Path(deskewed), Path(truth)
    if deskewed.is_dir():
        meta = io.read_json(deskewed / "deskew.json")
        tman = io.read_json(truth / "manifest.json") if truth.is_dir() else None
        tfiles = {e["index"]: truth / e["truth"] for e in tman["sweeps"]} if tman else {}
        pairs = []
        for e in meta["sweeps"]:
            if e["index"] not in tfiles:
                raise FormatError(f"no truth scan for sweep {e['index']}", truth)
            pairs.append((e["index"], deskewed / e["file"], tfiles[e["index"]]))
        return meta.get("method", "unknown"), meta.get("mode", "unknown"), pairs
    return "unknown", "unknown", [(0, deskewed, truth)]


def metrics_fields(prefix, m):
    fields = {f"{prefix}.rmse": m.rmse, f"{prefix}.mean": m.mean, f"{prefix}.max": m.max,
              f"{prefix}.count": m.count}
    for q in QUANTILES:
        for axis, v in zip("xyz", m.axis_quantiles[q]):
            fields[f"{prefix}.abs_error_q{int(round(q * 100)):02d}.{axis}"] = float(v)
    return fields


def cmd_evaluate(args):
    method, mode, pairs = _pairs(args.deskewed, args.truth)
    fields = {"kind": "evaluate", "method": args.method or method, "mode": mode, "sweeps": len(pairs)}
    all_d, all_t = [], []
    for index, dpath, tpath in pairs:
        d = io.read_sweep(dpath).points
        t = io.read_sweep(tpath).points
        fields.update(metrics_fields(f"sweep.{index}", evaluate(d, t)))
        all_d.append(d)
        all_t.append(t)
    overall = evaluate(np.concatenate(all_d), np.concatenate(all_t))
    fields.update(metrics_fields("overall", overall))
    if args.reference:
        ref = io.read_report(args.reference)
        fields["reference.rmse"] = ref["overall.rmse"]
        fields["improvement_percent"] = improvement_percentage(ref["overall.rmse"], overall.rmse)
    out = Path(args.out or "report.txt")
    io.write_report(out, fields)
    print(f"overall RMSE {overall.rmse:.6g} m over {overall.count} points; report: {out}")
    return 0


def cmd_compare(args):
    cfg = _load_config(args)
    master = cfg.seed
    mode = cfg.deskew_mode
    settings = _settings(None, cfg)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_run = {m: [] for m in METHODS}
    rows = []
    for run in range(cfg.runs):
        seed = master + run
        bundle = _simulate(cfg, seed)
        errors = {m: [] for m in METHODS}
        for sweep, truth, anchor in zip(bundle.sweeps, bundle.truths, bundle.anchors):
            results = {}
            for method in METHODS:
                result = _run_method(method, sweep, bundle.imu, anchor, settings, mode)
                results[method] = evaluate(result, truth).errors
                errors[method].append(results[method])
            offset = sweep.t - truth.sync_time
            rows.append(np.column_stack([np.full(len(sweep), run), np.full(len(sweep), sweep.index),
                                         np.arange(len(sweep)), offset,
                                         results["proposed"], results["baseline"]]))
        for method in METHODS:
            e = np.concatenate(errors[method])
            per_run[method].append(float(np.sqrt(np.mean(e**2))))
    fields = {"kind": "compare", "mode": mode, "trajectory": cfg.trajectory.kind,
              "master_seed": master, "runs": cfg.runs}
    for method in METHODS:
        r = np.array(per_run[method])
        fields[f"{method}.rmse_mean"] = float(r.mean())
        fields[f"{method}.rmse_std"] = float(r.std())
    fields["improvement_percent"] = improvement_percentage(fields["baseline.rmse_mean"],
                                                           fields["proposed.rmse_mean"])
    for run in range(cfg.runs):
        for method in METHODS:
            fields[f"run.{run}.{method}.rmse"] = per_run[method][run]
    io.write_report(out / "compare_report.txt", fields)
    io.write_table(out / "error_vs_time.csv",
                   ("run", "sweep", "point", "time_offset", "error_proposed", "error_baseline"),
                   np.concatenate(rows))
    for method in METHODS:
        print(f"{method:>9}: RMSE {fields[method + '.rmse_mean']:.6g} +/- {fields[method + '.rmse_std']:.3g} m")
    print(f"improvement: {fields['improvement_percent']:.2f} %")
    return 0


def _load_config(args):
    cfg = RunConfig.from_yaml(args.config)
    return cfg.with_overrides(seed=getattr(args, "seed", None), deskew_mode=getattr(args, "mode", None))


def build_parser():
    p = argparse.ArgumentParser(prog="imudeskew", description="IMU-driven LiDAR sweep de-skewing.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic bundle (IMU, sweeps, truth)")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=_u64, help="override the config seed")
    s.add_argument("--mode", choices=MODES, help="frame convention of the truth scans")
    s.add_argument("--out", help="output directory (default: output_dir from the config)")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("deskew", help="de-skew every sweep of a bundle")
    d.add_argument("bundle", help="bundle directory written by 'simulate'")
    d.add_argument("--config", help="settings to use instead of those recorded in the bundle")
    d.add_argument("--method", choices=METHODS, default="proposed")
    d.add_argument("--mode", choices=MODES)
    d.add_argument("--out", help="output directory (default: ./deskewed)")
    d.set_defaults(func=cmd_deskew)

    e = sub.add_parser("evaluate", help="compare de-skewed sweeps with truth scans")
    e.add_argument("deskewed", help="directory written by 'deskew', or one CSV file")
    e.add_argument("truth", help="bundle directory, or one truth CSV file")
    e.add_argument("--method", choices=METHODS, help="method tag for the report")
    e.add_argument("--reference", help="baseline report; adds the improvement percentage")
    e.add_argument("--out", help="report path (default: ./report.txt)")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="repeat simulate/deskew/evaluate for both methods")
    c.add_argument("--config", required=True)
    c.add_argument("--seed", type=_u64, help="override the master seed")
    c.add_argument("--mode", choices=MODES)
    c.add_argument("--out", help="output directory (default: output_dir from the config)")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DeskewError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
