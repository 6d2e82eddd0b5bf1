"""Command-line entry point tying the pipeline together.

Subcommands: convert, synth, featurize, embed, train, cv, early, wl,
gradcheck. Training-related commands read an optional JSON config file
(fields mirror TrainConfig); explicit flags override file values. Every
command that takes --seed is byte-reproducible in its file outputs.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from pathlib import Path

from . import converters, gradsuite
from .config import VARIANTS, TrainConfig, load_config
from .events import load_events, make_folds, write_events
from .layers import save_arrays
from .metrics import render_table, report_csv
from .synthgen import MODES, SynthSpec, generate
from .textrep import save_embeddings, tokenize, train_pv_dbow
from .trainer import cross_validate, early_detection_sweep, train_fold
from .windows import RATIO_MODES, featurize
from .wlkernel import similarity_trace


def _add_config_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--config",
        type=Path,
        help="JSON config file mirroring TrainConfig fields; see config.example.json "
        "for the full schema with defaults",
    )
    sub.add_argument("--seed", type=int, help="override: RNG seed")
    sub.add_argument("--variant", choices=VARIANTS, help="override: model variant")
    sub.add_argument("--epochs", type=int, help="override: training epochs")
    sub.add_argument("--lr", type=float, help="override: Adam learning rate")
    sub.add_argument("--batch-size", type=int, help="override: mini-batch size")
    sub.add_argument("--unit-seconds", type=float, help="override: window duration")
    sub.add_argument("--dropout", type=float, help="override: dropout rate")


def _config_from(args: argparse.Namespace) -> TrainConfig:
    config = load_config(args.config) if args.config else TrainConfig()
    return config.with_overrides(
        seed=args.seed,
        variant=args.variant,
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch_size,
        unit_seconds=args.unit_seconds,
        dropout=args.dropout,
    )


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_events=args.n_events,
        mode=args.mode,
        rumor_fraction=args.rumor_fraction,
        seed=args.seed,
        posts_mean=args.posts_mean,
        span_seconds=args.span_hours * 3600.0,
        quiet_seconds=args.quiet_hours * 3600.0,
    )
    events = generate(spec)
    write_events(args.out, events)
    print(f"wrote {len(events)} events to {args.out}")
    return 0


def cmd_convert(args) -> int:
    if args.format == "weibo":
        events, stats = converters.convert_weibo(args.input)
    else:
        if not args.labels or not args.trees:
            raise ValueError("twitter format needs --labels and --trees")
        events, stats = converters.convert_twitter(args.labels, args.trees, args.source_tweets)
    write_events(args.out, events)
    print(f"converted {stats.converted} events, skipped {stats.skipped}")
    for message in stats.messages[:20]:
        print(f"  skipped: {message}", file=sys.stderr)
    return 0


def cmd_featurize(args) -> int:
    events = load_events(args.events)
    rows = []
    for event in events:
        ws = featurize(event, args.unit_seconds, args.max_windows, args.layer_cap, args.ratio_mode)
        for t in range(1, ws.n_windows + 1):
            for j in range(1, ws.layer_cap + 1):
                rows.append(
                    [
                        event.event_id,
                        t,
                        j,
                        int(ws.counts[t - 1, j - 1]),
                        f"{ws.shares[t - 1, j - 1]:.6f}",
                        f"{ws.ratios[t - 1, j - 1]:.6f}",
                    ]
                )
    _write_csv(args.out, ["event_id", "window", "layer", "n", "p", "l"], rows)
    print(f"wrote {len(rows)} feature rows to {args.out}")
    return 0


def cmd_embed(args) -> int:
    events = load_events(args.events)
    corpus = [(p.post_id, tokenize(p.text)) for e in events for p in e.posts]
    store = train_pv_dbow(
        corpus,
        dimension=args.dim,
        epochs=args.epochs,
        negatives=args.negatives,
        lr=args.lr,
        seed=args.seed,
        min_count=args.min_count,
    )
    save_embeddings(args.out, store)
    print(f"wrote {len(store.vectors)} post vectors (dim {store.dimension}) to {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _config_from(args)
    events = load_events(args.events)
    plan = make_folds(events, max(2, round(1.0 / args.valid_fraction)), config.seed)
    train_events, valid_events = plan.split(events, 0)
    result = train_fold(train_events, valid_events, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_arrays(out_dir / "checkpoint.bin", result.params.to_arrays(), meta=config.to_dict())
    _write_csv(
        out_dir / "loss_curve.csv",
        ["epoch", "loss"],
        [[i, f"{v:.10f}"] for i, v in enumerate(result.loss_curve)],
    )
    (out_dir / "valid_report.csv").write_text(report_csv(result.report, config.variant))
    print(
        f"trained on {len(train_events)} events, validated on {len(valid_events)}; "
        f"best epoch {result.best_epoch}, valid accuracy {result.report.accuracy:.3f}"
    )
    return 0


def cmd_cv(args) -> int:
    config = _config_from(args)
    events = load_events(args.events)
    result = cross_validate(events, config, n_folds=args.folds, parallel=args.parallel_folds)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(report_csv(result.report, config.variant))
    _write_csv(
        out_dir / "predictions.csv",
        ["event_id", "y_hat", "label", "variant"],
        [[eid, f"{y:.10f}", lbl, config.variant] for eid, y, lbl, _fold in result.predictions],
    )
    if args.table:
        print(render_table({config.variant: result.report}))
    print(f"mean accuracy {result.report.mean_accuracy():.4f} over {args.folds} folds")
    return 0


def _parse_deadlines(raw: str) -> list[float]:
    out = []
    for piece in raw.split(","):
        piece = piece.strip().lower()
        out.append(math.inf if piece in ("inf", "infinity") else float(piece) * 3600.0)
    return out


def cmd_early(args) -> int:
    config = _config_from(args)
    events = load_events(args.events)
    deadlines = _parse_deadlines(args.deadlines)
    curve = early_detection_sweep(
        events, config, deadlines, n_folds=args.folds, parallel=args.parallel_folds
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [
        ["inf" if math.isinf(d) else f"{d / 3600.0:.4f}", f"{acc:.6f}"]
        for d, acc, _ in curve
    ]
    _write_csv(out_dir / "early_curve.csv", ["deadline_hours", "accuracy"], rows)
    for row in rows:
        print(f"deadline {row[0]:>8} h: accuracy {row[1]}")
    return 0


def cmd_wl(args) -> int:
    events = {e.event_id: e for e in load_events(args.events)}
    for eid in (args.event_a, args.event_b):
        if eid not in events:
            raise ValueError(f"event {eid!r} not found in {args.events}")
    trace = similarity_trace(
        events[args.event_a], events[args.event_b], args.unit_seconds, args.iterations
    )
    labels = [str(t) for t in range(1, len(trace))] + ["final"]
    rows = [[w, f"{s:.6f}"] for w, s in zip(labels, trace)]
    if args.out:
        _write_csv(args.out, ["window", "similarity"], rows)
    for w, s in rows:
        print(f"window {w:>6}: similarity {s}")
    return 0


def cmd_gradcheck(args) -> int:
    started = time.time()
    ok = True
    for entry in gradsuite.primitive_suite(trials=args.trials, seed=args.seed):
        print(f"primitive {entry.name:<16} {entry.report}")
        ok = ok and entry.report.passed
    full = gradsuite.full_model_report(seed=args.seed)
    print(f"full model       {full}")
    ok = ok and full.passed
    print(f"gradcheck finished in {time.time() - started:.1f}s: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rumornet",
        description="Rumor detection from dynamic propagation structure and content.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate a synthetic labeled event file")
    p.add_argument("--mode", choices=MODES, default="dynamic_structure")
    p.add_argument("--n-events", type=int, default=100)
    p.add_argument("--rumor-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--posts-mean", type=float, default=40.0)
    p.add_argument("--span-hours", type=float, default=4.0)
    p.add_argument("--quiet-hours", type=float, default=0.0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("convert", help="adapt a public dump to event JSON-Lines")
    p.add_argument("--format", choices=("weibo", "twitter"), required=True)
    p.add_argument("--input", type=Path, help="weibo: dump root directory")
    p.add_argument("--labels", type=Path, help="twitter: label file")
    p.add_argument("--trees", type=Path, help="twitter: tree directory")
    p.add_argument("--source-tweets", type=Path, help="twitter: optional id<TAB>text file")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_convert)

    p = subs.add_parser("featurize", help="emit per-window structural features as CSV")
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--unit-seconds", type=float, default=1200.0)
    p.add_argument("--max-windows", type=int, default=100)
    p.add_argument("--layer-cap", type=int, default=5)
    p.add_argument("--ratio-mode", choices=RATIO_MODES, default="adjacent_layer")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_featurize)

    p = subs.add_parser("embed", help="train paragraph vectors for every post")
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_embed)

    p = subs.add_parser("train", help="train one model with a held-out validation split")
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--valid-fraction", type=float, default=0.2)
    p.add_argument("--out-dir", type=Path, required=True)
    _add_config_options(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("cv", help="stratified k-fold cross-validation")
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--parallel-folds", type=int, default=1)
    p.add_argument("--table", action="store_true", help="print a results table")
    p.add_argument("--out-dir", type=Path, required=True)
    _add_config_options(p)
    p.set_defaults(func=cmd_cv)

    p = subs.add_parser("early", help="accuracy vs detection deadline sweep")
    p.add_argument("--events", type=Path, required=True)
    p.add_argument(
        "--deadlines",
        default="0.5,1,2,4,8,12,24,48",
        help="comma-separated hours; 'inf' means no truncation",
    )
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--parallel-folds", type=int, default=1)
    p.add_argument("--out-dir", type=Path, required=True)
    _add_config_options(p)
    p.set_defaults(func=cmd_early)

    p = subs.add_parser("wl", help="WL-kernel similarity trace between two events")
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--event-a", required=True)
    p.add_argument("--event-b", required=True)
    p.add_argument("--unit-seconds", type=float, default=1200.0)
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_wl)

    p = subs.add_parser("gradcheck", help="finite-difference check of all gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
