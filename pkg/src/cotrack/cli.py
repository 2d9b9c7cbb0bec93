"""Command-line entry point: ``cotrack {track,eval,synth,bench,selfcheck}``.

Exit codes: 0 success, 1 failed bench pairs or self-checks, 2 configuration
or invalid arguments, 3 missing files or malformed data, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import TrackerConfig, load_config, parse_kv_text, with_features
from .errors import ConfigError, DataError, InvalidArgument, NumericalError
from .evalbench import evaluate, load_otb_sequence, read_results, render_report, write_results
from .solver import trace_header
from .synth import KINDS, SynthSpec, generate_synthetic
from .tracker import track_sequence

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _err(msg: str) -> None:
    print(f"cotrack: {msg}", file=sys.stderr)


def _load_cfg(path, features=None) -> TrackerConfig:
    cfg = load_config(path) if path else TrackerConfig()
    if features:
        cfg = with_features(cfg, [f.strip() for f in features.split(",") if f.strip()])
    return cfg


def cmd_track(args) -> int:
    cfg = _load_cfg(args.config, args.features)
    seq = load_otb_sequence(args.seq_dir)
    trace = None
    if args.trace:
        trace = open(args.trace, "w")
        trace.write("frame," + trace_header(len(cfg.features_enabled)) + "\n")
    try:
        result = track_sequence(seq.frame_paths, seq.gt_boxes[0], cfg, render_dir=args.render, trace=trace)
    finally:
        if trace is not None:
            trace.close()
    write_results(result.boxes, args.out)
    if result.lost_at is not None:
        _err(f"warning: lost-at-frame-{result.lost_at + 1}")
    if result.skipped_updates:
        _err(f"warning: model update skipped on {len(result.skipped_updates)} frame(s)")
    if "cn_fallback" in result.diagnostics:
        _err("note: grayscale input, color names replaced by intensity")
    print(f"{len(result.boxes)} frames tracked -> {args.out}")
    return EXIT_OK


def report_path(results_csv: str) -> str:
    stem, _ = os.path.splitext(results_csv)
    return stem + "_report.csv"


def cmd_eval(args) -> int:
    seq = load_otb_sequence(args.seq_dir)
    boxes = read_results(args.results)
    rep = evaluate(boxes, seq.gt_boxes)
    table = render_report([(seq.name, rep)])
    out = report_path(args.results)
    with open(out, "w") as fh:
        fh.write(table.csv)
    print(f"average overlap {rep.average_overlap:.3f}")
    print(f"auc {rep.auc:.3f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec(
        kind=args.kind,
        frames=args.frames,
        frame_w=args.width,
        frame_h=args.height,
        target_w=args.target_w,
        target_h=args.target_h,
        amplitude=args.amplitude,
        period=args.period,
        rate=args.rate,
        gain_rate=args.gain_rate,
        deform_amp=args.deform_amp,
        noise_sigma=args.noise,
        seed=args.seed,
        grayscale=args.grayscale,
    )
    ds = generate_synthetic(spec, args.out_dir)
    print(f"{args.out_dir} {len(ds.frame_paths)} frames")
    return EXIT_OK


# -- bench ----------------------------------------------------------------------


def load_suite(path):
    """Suite file: ``sequences = [a, b]``, ``configs = [...]`` (``default`` allowed),
    optional ``names = [...]`` and ``jobs = N``. Brackets are optional. Relative paths resolve
    against the suite file's directory."""
    with open(path, encoding="utf-8") as fh:
        kv = parse_kv_text(fh.read(), str(path))
    unknown = set(kv) - {"sequences", "configs", "names", "jobs"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown suite key")
    base = os.path.dirname(os.path.abspath(path))

    def as_list(key, default):
        v = kv.get(key, default)
        if isinstance(v, str):
            return [item.strip() for item in v.split(",") if item.strip()]
        return list(v)

    resolve = lambda p: p if os.path.isabs(p) else os.path.join(base, p)
    seqs = [resolve(s) for s in as_list("sequences", [])]
    if not seqs:
        raise ConfigError("sequences", "suite lists no sequences")
    cfg_paths = [None if c == "default" else resolve(c) for c in as_list("configs", ["default"])]
    names = as_list("names", [os.path.splitext(os.path.basename(c))[0] if c else "default" for c in cfg_paths])
    if len(names) != len(cfg_paths):
        raise ConfigError("names", "needs one name per config")
    try:
        jobs = int(kv.get("jobs", 1))
    except ValueError:
        raise ConfigError("jobs", "must be an integer") from None
    configs = [load_config(c) if c else TrackerConfig() for c in cfg_paths]
    return seqs, configs, names, max(1, jobs)


def _bench_pair(seq_dir, cfg):
    try:
        seq = load_otb_sequence(seq_dir)
        result = track_sequence(seq.frame_paths, seq.gt_boxes[0], cfg)
        return evaluate(result.boxes, seq.gt_boxes), None
    except Exception as exc:  # isolate every pair; the report shows FAILED
        return None, f"{type(exc).__name__}: {exc}"


def run_bench(seqs, configs, jobs=1, log=_err):
    pairs = [(s, c) for s in seqs for c in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outcomes = list(ex.map(_bench_pair, *zip(*pairs)))
    else:
        outcomes = [_bench_pair(s, c) for s, c in pairs]
    for (s, _), (_, err) in zip(pairs, outcomes):
        if err:
            log(f"{s}: FAILED ({err})")
    reports = [rep for rep, _ in outcomes]
    rows = [(os.path.basename(os.path.normpath(s)), reports[k * len(configs) : (k + 1) * len(configs)])
            for k, s in enumerate(seqs)]
    return rows


def cmd_bench(args) -> int:
    seqs, configs, names, jobs = load_suite(args.suite)
    if args.jobs:
        jobs = args.jobs
    rows = run_bench(seqs, configs, jobs)
    if len(configs) == 1:
        table = render_report([(s, reps[0]) for s, reps in rows])
    else:
        table = render_report(rows, trackers=names)
    sys.stdout.write(table.text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table.csv)
    failed = any(r is None for _, reps in rows for r in reps)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_selfcheck

    return EXIT_OK if run_selfcheck() else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cotrack", description="Multi-feature correlation-filter tracker.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track one OTB-layout sequence")
    p.add_argument("seq_dir")
    p.add_argument("--config", help="key = value config file (defaults if omitted)")
    p.add_argument("--out", required=True, help="result CSV (frame,x,y,w,h)")
    p.add_argument("--render", metavar="DIR", help="write annotated PNG frames here")
    p.add_argument("--trace", metavar="CSV", help="write solver convergence traces here")
    p.add_argument("--features", help="comma-separated subset of hog,cn,lbp")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score a result CSV against ground truth")
    p.add_argument("results")
    p.add_argument("seq_dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic OTB-layout sequence")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("out_dir")
    d = SynthSpec("translate")
    p.add_argument("--frames", type=int, default=d.frames)
    p.add_argument("--width", type=int, default=d.frame_w)
    p.add_argument("--height", type=int, default=d.frame_h)
    p.add_argument("--target-w", type=int, default=d.target_w)
    p.add_argument("--target-h", type=int, default=d.target_h)
    p.add_argument("--amplitude", type=float, default=d.amplitude, help="translate: path amplitude in px")
    p.add_argument("--period", type=float, default=d.period, help="translate/deform: period in frames")
    p.add_argument("--rate", type=float, default=d.rate, help="scale_ramp: relative growth per frame")
    p.add_argument("--gain-rate", type=float, default=d.gain_rate, help="illumination_ramp: gain change per frame")
    p.add_argument("--deform-amp", type=float, default=d.deform_amp, help="deform: relative aspect swing")
    p.add_argument("--noise", type=float, default=d.noise_sigma, help="pixel noise sigma")
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--grayscale", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="run a suite of sequences x configs")
    p.add_argument("suite")
    p.add_argument("--out", help="report CSV")
    p.add_argument("--jobs", type=int, help="parallel worker processes")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("selfcheck", help="run the built-in oracle checks")
    p.set_defaults(func=cmd_selfcheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidArgument) as exc:
        _err(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (OSError, DataError) as exc:
        _err(f"data error: {exc}")
        return EXIT_DATA
    except NumericalError as exc:
        _err(f"numerical error: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
