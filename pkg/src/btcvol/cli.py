"""Command-line entry points for the full pipeline.

Subcommands: synth (fixture generator), ingest, featurize, train, ablate,
hpo, report. Configuration comes from a plain-text key=value file plus
flag overrides; every source of randomness hangs off --seed. Exit codes:
0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from . import experiment, features, ingest, models, synth, vader

log = logging.getLogger(__name__)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="plain-text key = value configuration file")
    parser.add_argument("--data", dest="data_dir", help="featurized data directory")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("--model", choices=experiment.MODEL_KINDS)
    parser.add_argument("--features", help="feature sets for the dual model, e.g. 'User' or 'Count,User'")
    parser.add_argument("--runs", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--train-days", dest="train_days", type=int)
    parser.add_argument("--val-days", dest="val_days", type=int)
    parser.add_argument("--test-days", dest="test_days", type=int)
    parser.add_argument("--filters", type=int)
    parser.add_argument("--kernel-size", dest="kernel_size", type=int)
    parser.add_argument("--dilation-base", dest="dilation_base", type=int)
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--weight-decay", dest="weight_decay", type=float)
    parser.add_argument("--recurrent-dim", dest="recurrent_dim", type=int)
    parser.add_argument("--bottleneck-dim", dest="bottleneck_dim", type=int)
    parser.add_argument("--normalization", choices=("none", "batch", "layer", "weight"))
    parser.add_argument("--skip-connections", dest="skip_connections",
                        choices=("true", "false"))
    parser.add_argument("--garch-frequency", dest="garch_frequency",
                        choices=("15min", "daily"))
    parser.add_argument("--arrv-lag", dest="arrv_lag", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--checkpoints", action="store_const", const=True, default=None)


def _config_from_args(args: argparse.Namespace) -> experiment.ExperimentConfig:
    known = {f.name for f in dataclasses.fields(experiment.ExperimentConfig)}
    overrides = {}
    for key, value in vars(args).items():
        if key in known and value is not None:
            if key == "skip_connections":
                value = value == "true"
            overrides[key] = value
    return experiment.build_config(getattr(args, "config", None), overrides)


def _cmd_synth(args) -> int:
    cfg = synth.SynthConfig(
        days=args.days, seed=args.seed, daily_vol=args.daily_vol,
        persistence=args.persistence, shape_coupling=args.shape_coupling,
        user_coupling=args.user_coupling, tweet_coupling=args.tweet_coupling,
        vader_coupling=args.vader_coupling, count_coupling=args.count_coupling,
        tweets_per_bin=args.tweets_per_bin)
    data = synth.generate(cfg)
    os.makedirs(args.out, exist_ok=True)
    synth.write_candles_csv(data.candles, os.path.join(args.out, "candles.csv"))
    synth.write_tweets_jsonl(data.tweet_lines, os.path.join(args.out, "tweets.jsonl"))
    print(f"wrote {len(data.candles)} candles and {len(data.tweet_lines)} tweets to {args.out}")
    return 0


def _cmd_ingest(args) -> int:
    lexicon = vader.load_lexicon(args.lexicon)
    stats = ingest.IngestStats()
    records = []
    for path in args.tweets:
        with open(path) as fh:
            batch, stats = ingest.ingest_lines(fh, stats)
        records.extend(batch)
    compounds = [vader.vader_compound(r.tweet_text, lexicon).compound for r in records]
    ingest.write_sorted(records, args.out, compounds)
    print(f"lines={stats.lines} kept={stats.kept} irrelevant={stats.irrelevant} "
          f"rejects={stats.rejects} defaults_applied={stats.defaults_applied}",
          file=sys.stderr)
    print(f"wrote {stats.kept} records to {args.out}")
    return 0


def _cmd_featurize(args) -> int:
    series = features.load_candles(args.candles, max_gap_bins=args.max_gap_bins)
    table = features.days_from_candles(series)
    os.makedirs(args.out, exist_ok=True)

    returns_path = os.path.join(args.out, "returns.csv")
    with open(returns_path, "w") as fh:
        fh.write("timestamp,log_return\n")
        for i, day in enumerate(table.dates):
            if not table.valid[i]:
                continue
            for b, ts in enumerate(features.day_grid(day)):
                fh.write(f"{features.format_timestamp(ts)},{float(table.returns[i][b])!r}\n")

    if args.tweet_table:
        records, compounds = ingest.read_table(args.tweet_table)
        rows = []
        for i, day in enumerate(table.dates):
            if not table.valid[i]:
                continue
            start = features.day_grid(day)[0]
            bins = features.bin_tweets(records, start, features.DAY_BINS, compounds)
            selector = features.FeatureSetSelector.parse("Count,VADER,Tweet,User")
            matrix = features.select_features(bins, selector)
            for b, fb in enumerate(bins):
                cells = ",".join(repr(float(v)) for v in matrix[b])
                rows.append(f"{features.format_timestamp(fb.start)},{cells}")
        with open(os.path.join(args.out, "tweet_features.csv"), "w") as fh:
            fh.write("timestamp," + ",".join(features.ALL_FEATURE_COLUMNS) + "\n")
            for row in rows:
                fh.write(row + "\n")
    kept = int(table.valid.sum())
    print(f"featurized {kept} full days into {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    manifests = experiment.cmd_train(config)
    for m in manifests:
        metrics = " ".join(f"{k}={v:.4f}" for k, v in m["metrics"].items())
        print(f"{m['label']} run={m['run_index']} seed={m['seed']} {metrics}")
    print(f"wrote {len(manifests)} manifest(s) to {config.out_dir}")
    return 0


def _cmd_ablate(args) -> int:
    config = _config_from_args(args)
    if args.identity_check:
        ok = experiment.ablation_identity_check(config)
        print("ablation identity: " + ("PASS (bitwise equal)" if ok else "FAIL"))
        return 0 if ok else 2
    subsets = experiment.all_nonempty_subsets() if args.all_subsets else (args.subsets or [])
    entries = experiment.cmd_ablate(config, subsets)
    print(experiment.evaluation.render_table(entries, baseline="tcn"))
    return 0


def _cmd_hpo(args) -> int:
    config = _config_from_args(args)
    best, trials = experiment.cmd_hpo(config, args.budget)
    finite = [t for t in trials if t["val_mape"] == t["val_mape"]]
    best_trial = min(finite, key=lambda t: t["val_mape"])
    print(f"{len(trials)} trials; best validation MAPE {best_trial['val_mape']:.4f}")
    print(f"best configuration written to {os.path.join(config.out_dir, 'best_config.txt')}")
    return 0


def _cmd_report(args) -> int:
    experiment.cmd_report(args.manifests, args.out, bootstrap_seed=args.seed)
    print(f"report written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="btcvol",
                                     description="Bitcoin realized-volatility forecasting toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic candle + tweet dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--days", type=int, default=144)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--daily-vol", dest="daily_vol", type=float, default=0.02)
    p.add_argument("--persistence", type=float, default=0.75)
    p.add_argument("--shape-coupling", dest="shape_coupling", type=float, default=0.9)
    p.add_argument("--user-coupling", dest="user_coupling", type=float, default=0.0)
    p.add_argument("--tweet-coupling", dest="tweet_coupling", type=float, default=0.0)
    p.add_argument("--vader-coupling", dest="vader_coupling", type=float, default=0.0)
    p.add_argument("--count-coupling", dest="count_coupling", type=float, default=0.0)
    p.add_argument("--tweets-per-bin", dest="tweets_per_bin", type=float, default=3.0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="filter, flatten and score raw tweet JSONL")
    p.add_argument("--tweets", nargs="+", required=True, help="raw JSONL file(s)")
    p.add_argument("--lexicon", help="tab-separated token/valence file (default: bundled)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("featurize", help="build return and tweet-feature tables")
    p.add_argument("--candles", required=True)
    p.add_argument("--tweet-table", dest="tweet_table", help="CSV from the ingest step")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--max-gap-bins", dest="max_gap_bins", type=int, default=4)
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="run a model over the 96/48 day split")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("ablate", help="feature-subset ablation against the single-pipeline model")
    _add_config_flags(p)
    p.add_argument("--subsets", nargs="*", help="feature subsets, e.g. User 'Count,User'")
    p.add_argument("--all-subsets", action="store_true",
                   help="run all 15 non-empty subsets")
    p.add_argument("--identity-check", action="store_true",
                   help="verify the zeroed-lower-pipeline identity end to end")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("hpo", help="seeded random hyperparameter search")
    _add_config_flags(p)
    p.add_argument("--budget", type=int, required=True)
    p.set_defaults(func=_cmd_hpo)

    p = sub.add_parser("report", help="tables and plots from saved manifests")
    p.add_argument("--manifests", nargs="+", required=True,
                   help="manifest files or directories")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("BTCVOL_LOGLEVEL", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (experiment.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        log.exception("command failed")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
