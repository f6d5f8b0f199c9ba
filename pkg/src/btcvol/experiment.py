"""Experiment orchestration: configuration, repeated seeded runs, ablation
matrix, random hyperparameter search, and report emission.

A run is fully determined by the configuration hash and its seed: model
construction, window shuffling and dropout all draw from one generator
seeded with ``base_seed + run_index``, and deterministic baselines run
exactly once.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import econ, evaluation, models
from .features import (
    ALL_FEATURE_COLUMNS,
    DAY_BINS,
    DayTable,
    FeatureSetSelector,
    apply_scaler,
    fit_scaler,
    make_day_windows,
    parse_timestamp,
    realized_volatility,
    scale_windows,
)

log = logging.getLogger(__name__)

DEEP_MODELS = ("tcn", "dtcn", "lstm", "gru")
BASELINE_MODELS = ("arrv", "garch", "const-mean")
MODEL_KINDS = DEEP_MODELS + BASELINE_MODELS


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """Everything a training campaign needs; defaults follow the published
    best trial for the convolutional models."""

    data_dir: str = "."
    out_dir: str = "runs"
    model: str = "tcn"
    features: str = "User"
    train_days: int = 72
    val_days: int = 24
    test_days: int = 48
    epochs: int = 30
    runs: int = 20
    seed: int = 0
    filters: int = 287
    kernel_size: int = 5
    dilation_base: int = 4
    skip_connections: bool = True
    normalization: str = "none"
    dropout: float = 0.217
    epsilon: float = 0.0913
    learning_rate: float = 6.49e-5
    weight_decay: float = 5.93e-6
    recurrent_dim: int = 261
    bottleneck_dim: int = 8
    arrv_lag: int = 1
    garch_frequency: str = "15min"
    workers: int = 1
    checkpoints: bool = False

    @property
    def horizon(self) -> int:
        return self.train_days + self.val_days

    def validate(self) -> None:
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {MODEL_KINDS}")
        if self.runs < 1:
            raise ConfigError("run count must be at least 1")
        if min(self.train_days, self.val_days, self.test_days) < 1:
            raise ConfigError("all split day counts must be positive")
        if self.garch_frequency not in ("15min", "daily"):
            raise ConfigError("garch_frequency must be '15min' or 'daily'")
        if self.model == "dtcn":
            FeatureSetSelector.parse(self.features)

    def forecast_config(self) -> models.ForecastConfig:
        return models.ForecastConfig(
            filters=self.filters, kernel_size=self.kernel_size,
            dilation_base=self.dilation_base, skip_connections=self.skip_connections,
            normalization=self.normalization, dropout=self.dropout,
            epsilon=self.epsilon, learning_rate=self.learning_rate,
            weight_decay=self.weight_decay, recurrent_dim=self.recurrent_dim,
            bottleneck_dim=self.bottleneck_dim, epochs=self.epochs)


# per-model defaults from the hyperparameter search backing the harness
MODEL_DEFAULTS = {
    "tcn": {},
    "dtcn": {},
    "lstm": {"recurrent_dim": 261, "dropout": 0.0237, "epsilon": 0.0364,
             "learning_rate": 0.00521, "weight_decay": 9.25e-7},
    "gru": {"recurrent_dim": 43, "dropout": 0.0544, "epsilon": 0.0431,
            "learning_rate": 0.00973, "weight_decay": 1.59e-8},
}

_CONFIG_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    kind = _CONFIG_TYPES.get(name)
    if kind is None:
        raise ConfigError(f"unknown configuration key {name!r}")
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def read_config_file(path) -> dict:
    """Parse the plain-text configuration grammar: one ``key = value`` per
    line, ``#`` starts a comment, blank lines ignored."""
    overrides = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            overrides[key.strip()] = _coerce(key.strip(), value.strip())
    return overrides


def build_config(file_path=None, flag_overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then per-model defaults, then file, then flags."""
    staged: dict = {}
    if file_path:
        staged.update(read_config_file(file_path))
    flags = {k: v for k, v in (flag_overrides or {}).items() if v is not None}
    model = flags.get("model", staged.get("model", "tcn"))
    merged = dict(MODEL_DEFAULTS.get(model, {}))
    merged.update(staged)
    merged.update(flags)
    config = ExperimentConfig(**merged)
    config.validate()
    return config


def config_hash(config: ExperimentConfig) -> str:
    payload = "\n".join(f"{k}={v!r}" for k, v in sorted(dataclasses.asdict(config).items())
                        if k not in ("out_dir", "workers", "checkpoints"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# data loading

@dataclass
class DataBundle:
    """Featurized dataset: aligned daily return rows and tweet feature bins."""

    dates: list
    returns_by_day: np.ndarray                 # (n_days, 96)
    features_by_day: np.ndarray | None         # (n_days, 96, 14) fixed column order
    feature_columns: list


def load_features_dir(path) -> DataBundle:
    returns_csv = os.path.join(path, "returns.csv")
    features_csv = os.path.join(path, "tweet_features.csv")
    by_day: dict = {}
    with open(returns_csv) as fh:
        header = fh.readline().strip()
        if header != "timestamp,log_return":
            raise ConfigError(f"unexpected returns.csv header: {header}")
        for line in fh:
            stamp, value = line.strip().split(",")
            ts = parse_timestamp(stamp)
            by_day.setdefault(ts.date(), []).append(float(value))
    dates = sorted(by_day)
    for day in dates:
        if len(by_day[day]) != DAY_BINS:
            raise ConfigError(f"day {day} has {len(by_day[day])} return bins, expected {DAY_BINS}")
    returns = np.asarray([by_day[day] for day in dates])

    features = None
    if os.path.exists(features_csv):
        rows_by_day: dict = {}
        with open(features_csv) as fh:
            header = fh.readline().strip().split(",")
            if header != ["timestamp"] + ALL_FEATURE_COLUMNS:
                raise ConfigError(f"unexpected tweet_features.csv header: {header}")
            for line in fh:
                cells = line.strip().split(",")
                ts = parse_timestamp(cells[0])
                rows_by_day.setdefault(ts.date(), []).append([float(c) for c in cells[1:]])
        features = np.zeros((len(dates), DAY_BINS, len(ALL_FEATURE_COLUMNS)))
        for i, day in enumerate(dates):
            rows = rows_by_day.get(day)
            if rows is None:
                continue
            if len(rows) != DAY_BINS:
                raise ConfigError(f"day {day} has {len(rows)} feature bins")
            features[i] = rows
    return DataBundle(dates=dates, returns_by_day=returns,
                      features_by_day=features, feature_columns=list(ALL_FEATURE_COLUMNS))


def select_bundle_features(bundle: DataBundle, selector: FeatureSetSelector) -> np.ndarray:
    if bundle.features_by_day is None:
        raise ConfigError("this dataset has no tweet features; run featurize with a tweet table")
    idx = [bundle.feature_columns.index(c) for c in selector.columns()]
    return bundle.features_by_day[:, :, idx]


# ---------------------------------------------------------------------------
# split + scaling

@dataclass
class PreparedData:
    """Scaled windows plus everything the baselines need."""

    train_windows: list          # the full training horizon (train + validation days)
    fit_windows: list            # train days only (hyperparameter search)
    val_windows: list
    test_windows: list
    return_scaler: object
    feature_scaler: object | None
    horizon_rv: np.ndarray       # daily RV over the training horizon
    horizon_returns: np.ndarray  # 15-minute returns over the training horizon
    full_returns: np.ndarray     # horizon + test, for conditioning the GARCH state
    test_dates: list
    test_true_rv: np.ndarray


def prepare(bundle: DataBundle, config: ExperimentConfig,
            selector: FeatureSetSelector | None = None) -> PreparedData:
    horizon, test = config.horizon, config.test_days
    needed = horizon + test
    if len(bundle.dates) < needed:
        raise ConfigError(f"dataset has {len(bundle.dates)} days, need {needed}")
    dates = bundle.dates[:needed]
    returns = bundle.returns_by_day[:needed]
    feats = select_bundle_features(bundle, selector)[:needed] if selector else None

    table = DayTable(dates=dates, returns=returns, valid=np.ones(len(dates), dtype=bool))
    raw_windows = make_day_windows(table, feats)

    return_scaler = fit_scaler(returns[:horizon].reshape(-1))
    feature_scaler = None
    if feats is not None:
        feature_scaler = fit_scaler(feats[:horizon].reshape(-1, feats.shape[2]))

    index = {day: i for i, day in enumerate(dates)}
    scaled = scale_windows(raw_windows, return_scaler, feature_scaler)
    train_w = [w for w in scaled if index[w.date] < horizon]
    fit_w = [w for w in scaled if index[w.date] < config.train_days]
    val_w = [w for w in scaled if config.train_days <= index[w.date] < horizon]
    test_w = [w for w in scaled if index[w.date] >= horizon]

    horizon_rv = np.asarray([realized_volatility(returns[i]) for i in range(horizon)])
    return PreparedData(
        train_windows=train_w, fit_windows=fit_w, val_windows=val_w, test_windows=test_w,
        return_scaler=return_scaler, feature_scaler=feature_scaler,
        horizon_rv=horizon_rv,
        horizon_returns=returns[:horizon].reshape(-1),
        full_returns=returns.reshape(-1),
        test_dates=[w.date for w in test_w],
        test_true_rv=np.asarray([realized_volatility(w.target_raw) for w in test_w]),
    )


# ---------------------------------------------------------------------------
# single runs

def build_model(config: ExperimentConfig, rng: np.random.Generator,
                selector: FeatureSetSelector | None = None):
    fc = config.forecast_config()
    if config.model == "tcn":
        return models.TCNForecaster(fc, rng)
    if config.model == "dtcn":
        sel = selector or FeatureSetSelector.parse(config.features)
        return models.DTCNForecaster(fc, sel.width, rng)
    if config.model in ("lstm", "gru"):
        return models.RecurrentForecaster(config.model, fc, rng)
    raise ConfigError(f"{config.model} is not a trainable deep model")


def run_deep(config: ExperimentConfig, prepared: PreparedData, seed: int,
             run_index: int, label: str,
             selector: FeatureSetSelector | None = None,
             train_windows: list | None = None,
             eval_windows: list | None = None) -> dict:
    """Train and evaluate one seeded run; returns a manifest dict."""
    rng = np.random.default_rng(seed)
    model = build_model(config, rng, selector)
    windows = train_windows if train_windows is not None else prepared.train_windows
    trace = models.fit(model, windows, rng)
    evals = models.evaluate(model, eval_windows if eval_windows is not None
                            else prepared.test_windows, prepared.return_scaler)
    true = [p.true_rv for p in evals]
    pred = [p.pred_rv for p in evals]
    manifest = {
        "config_hash": config_hash(config),
        "model": config.model,
        "label": label,
        "seed": seed,
        "run_index": run_index,
        "deterministic": False,
        "metrics": evaluation.metrics(true, pred).as_dict(),
        "final_loss": trace[-1] if trace else 0.0,
        "dates": [str(p.date) for p in evals],
        "true_rv": true,
        "pred_rv": pred,
    }
    if config.model in ("tcn", "dtcn"):
        manifest["head_bias"] = [b for _, b in models.export_head_bias(model)]
    if config.checkpoints:
        path = os.path.join(config.out_dir, f"ckpt_{label}_{run_index}.bin")
        models.save_model(model, path)
        manifest["checkpoint"] = path
    return manifest


def run_baseline(config: ExperimentConfig, prepared: PreparedData) -> dict:
    """Evaluate a deterministic baseline once over the test horizon."""
    kind = config.model
    test_n = len(prepared.test_windows)
    if kind == "arrv":
        model = econ.arrv_fit(prepared.horizon_rv, p=config.arrv_lag)
        history = list(prepared.horizon_rv)
        preds = []
        for w in prepared.test_windows:
            recent = np.asarray(history[-config.arrv_lag:][::-1])
            preds.append(econ.arrv_predict(model, recent))
            history.append(realized_volatility(w.target_raw))
        pred = np.asarray(preds)
        params = {"intercept": model.intercept, "coefficients": list(model.coefficients)}
    elif kind == "garch":
        if config.garch_frequency == "daily":
            horizon_daily = prepared.horizon_returns.reshape(-1, DAY_BINS).sum(axis=1)
            full_daily = prepared.full_returns.reshape(-1, DAY_BINS).sum(axis=1)
            model = econ.garch_fit(horizon_daily)
            r2, sigma2 = econ.garch_filter(model, full_daily)
            horizon = len(horizon_daily)
            pred = np.asarray([
                np.sqrt(model.omega + model.alpha * r2[horizon - 1 + i]
                        + model.beta * sigma2[horizon - 1 + i])
                for i in range(test_n)])
        else:
            model = econ.garch_fit(prepared.horizon_returns)
            r2, sigma2 = econ.garch_filter(model, prepared.full_returns)
            bins = len(prepared.horizon_returns)
            pred = np.asarray([
                econ.garch_forecast_daily_rv(
                    model,
                    last_r2=float(r2[bins - 1 + i * DAY_BINS]),
                    last_var=float(sigma2[bins - 1 + i * DAY_BINS]),
                    steps=DAY_BINS)
                for i in range(test_n)])
        params = {"omega": model.omega, "alpha": model.alpha, "beta": model.beta,
                  "converged": model.converged}
    elif kind == "const-mean":
        level = float(prepared.horizon_rv.mean())
        pred = np.full(test_n, level)
        params = {"level": level}
    else:
        raise ConfigError(f"{kind} is not a deterministic baseline")

    true = prepared.test_true_rv
    return {
        "config_hash": config_hash(config),
        "model": kind,
        "label": kind,
        "seed": config.seed,
        "run_index": 0,
        "deterministic": True,
        "metrics": evaluation.metrics(true, pred).as_dict(),
        "final_loss": 0.0,
        "dates": [str(d) for d in prepared.test_dates],
        "true_rv": [float(v) for v in true],
        "pred_rv": [float(v) for v in pred],
        "parameters": params,
    }


# ---------------------------------------------------------------------------
# commands

def _run_many(config: ExperimentConfig, prepared: PreparedData, label: str,
              selector: FeatureSetSelector | None = None) -> list[dict]:
    """Repeated seeded runs for one model; deterministic kinds run once."""
    if config.model in BASELINE_MODELS:
        return [run_baseline(config, prepared)]
    seeds = [(i, config.seed + i) for i in range(config.runs)]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(run_deep, config, prepared, seed, i, label, selector)
                       for i, seed in seeds]
            manifests = [f.result() for f in futures]
    else:
        manifests = [run_deep(config, prepared, seed, i, label, selector)
                     for i, seed in seeds]
    manifests.sort(key=lambda m: m["run_index"])
    return manifests


def save_manifests(manifests: list[dict], out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for m in manifests:
        name = f"manifest_{m['label'].replace(' ', '').replace(',', '+')}_{m['run_index']}.json"
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            json.dump(m, fh, indent=1, sort_keys=True)
        paths.append(path)
    return paths


def load_manifests(paths) -> list[dict]:
    out = []
    for path in paths:
        if os.path.isdir(path):
            for name in sorted(os.listdir(path)):
                if name.startswith("manifest_") and name.endswith(".json"):
                    with open(os.path.join(path, name)) as fh:
                        out.append(json.load(fh))
        else:
            with open(path) as fh:
                out.append(json.load(fh))
    return out


def cmd_train(config: ExperimentConfig) -> list[dict]:
    config.validate()
    bundle = load_features_dir(config.data_dir)
    selector = FeatureSetSelector.parse(config.features) if config.model == "dtcn" else None
    prepared = prepare(bundle, config, selector)
    label = config.model if selector is None else f"dtcn_{selector.label()}"
    manifests = _run_many(config, prepared, label, selector)
    save_manifests(manifests, config.out_dir)
    return manifests


def all_nonempty_subsets() -> list[str]:
    names = ["Count", "VADER", "Tweet", "User"]
    subsets = []
    for size in range(1, len(names) + 1):
        for combo in combinations(names, size):
            subsets.append(",".join(combo))
    return subsets


def cmd_ablate(config: ExperimentConfig, subsets: list[str]) -> list[evaluation.SignificanceEntry]:
    """Baseline single-pipeline runs plus one dual-pipeline batch per
    feature subset, compared with one-sided Welch tests."""
    if not subsets:
        raise ConfigError("ablation needs at least one feature subset")
    selectors = [FeatureSetSelector.parse(s) for s in subsets]

    bundle = load_features_dir(config.data_dir)
    base_cfg = dataclasses.replace(config, model="tcn")
    prepared = prepare(bundle, base_cfg, None)
    baseline_runs = _run_many(base_cfg, prepared, "tcn")
    save_manifests(baseline_runs, config.out_dir)

    entries = [summarize("tcn", baseline_runs, None)]
    baseline_scores = {m: [r["metrics"][m] for r in baseline_runs]
                       for m in evaluation.METRIC_NAMES}
    for selector in selectors:
        sub_cfg = dataclasses.replace(config, model="dtcn", features=selector.label())
        sub_prepared = prepare(bundle, sub_cfg, selector)
        label = f"dtcn_{selector.label()}"
        runs = _run_many(sub_cfg, sub_prepared, label, selector)
        save_manifests(runs, config.out_dir)
        pvalues = {
            m: evaluation.one_sided_t(baseline_scores[m],
                                      [r["metrics"][m] for r in runs], kind="welch")
            for m in evaluation.METRIC_NAMES}
        entries.append(summarize(label, runs, pvalues))

    os.makedirs(config.out_dir, exist_ok=True)
    evaluation.write_table_csv(entries, os.path.join(config.out_dir, "ablation_table.csv"))
    with open(os.path.join(config.out_dir, "ablation_table.txt"), "w") as fh:
        fh.write(evaluation.render_table(entries, baseline="tcn") + "\n")
    return entries


def ablation_identity_check(config: ExperimentConfig) -> bool:
    """Train the single-pipeline model, graft its weights into a
    dual-pipeline model with a zeroed lower pipeline, and verify the
    evaluation output matches bitwise."""
    bundle = load_features_dir(config.data_dir)
    selector = FeatureSetSelector.parse(config.features)
    tcn_cfg = dataclasses.replace(config, model="tcn")
    prepared_tcn = prepare(bundle, tcn_cfg, None)
    prepared_dual = prepare(bundle, dataclasses.replace(config, model="dtcn"), selector)

    rng = np.random.default_rng(config.seed)
    tcn = models.TCNForecaster(tcn_cfg.forecast_config(), rng)
    models.fit(tcn, prepared_tcn.train_windows, rng)
    dual = models.dtcn_from_tcn(tcn, selector.width)

    tcn_eval = models.evaluate(tcn, prepared_tcn.test_windows, prepared_tcn.return_scaler)
    dual_eval = models.evaluate(dual, prepared_dual.test_windows, prepared_dual.return_scaler)
    return all(a.pred_rv == b.pred_rv and a.true_rv == b.true_rv
               for a, b in zip(tcn_eval, dual_eval))


def summarize(label: str, runs: list[dict], pvalues: dict | None) -> evaluation.SignificanceEntry:
    values = {m: np.asarray([r["metrics"][m] for r in runs])
              for m in evaluation.METRIC_NAMES}
    return evaluation.SignificanceEntry(
        label=label,
        means={m: float(v.mean()) for m, v in values.items()},
        stds={m: float(v.std(ddof=1)) if len(runs) > 1 else 0.0 for m, v in values.items()},
        pvalues=pvalues,
        runs=len(runs),
    )


# ---------------------------------------------------------------------------
# hyperparameter search

@dataclass(frozen=True)
class SearchSpace:
    """Sampling bounds; learning rate and weight decay draw log-uniformly."""

    filters: tuple = (32, 512)
    recurrent_dim: tuple = (32, 512)
    dropout: tuple = (0.0, 0.5)
    epsilon: tuple = (0.01, 0.1)
    learning_rate: tuple = (1e-7, 1e-2)
    weight_decay: tuple = (1e-9, 1e-2)
    kernel_size: tuple = (2, 6)
    dilation_base: tuple = (2, 4)
    skip_connections: tuple = (False, True)
    normalization: tuple = ("none", "batch", "layer", "weight")

    def sample(self, rng: np.random.Generator, model: str) -> dict:
        def log_uniform(lo, hi):
            return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))

        params = {
            "dropout": float(rng.uniform(*self.dropout)),
            "epsilon": float(rng.uniform(*self.epsilon)),
            "learning_rate": log_uniform(*self.learning_rate),
            "weight_decay": log_uniform(*self.weight_decay),
        }
        if model in ("tcn", "dtcn"):
            params["filters"] = int(rng.integers(self.filters[0], self.filters[1] + 1))
            params["kernel_size"] = int(rng.integers(self.kernel_size[0], self.kernel_size[1] + 1))
            params["dilation_base"] = int(rng.integers(self.dilation_base[0],
                                                       self.dilation_base[1] + 1))
            params["skip_connections"] = bool(self.skip_connections[int(rng.integers(2))])
            params["normalization"] = str(
                self.normalization[int(rng.integers(len(self.normalization)))])
        else:
            params["recurrent_dim"] = int(rng.integers(self.recurrent_dim[0],
                                                       self.recurrent_dim[1] + 1))
        return params


def validation_mape(config: ExperimentConfig, prepared: PreparedData, seed: int,
                    selector: FeatureSetSelector | None = None) -> float:
    """Train on the train-day windows, score MAPE on the validation days."""
    rng = np.random.default_rng(seed)
    model = build_model(config, rng, selector)
    models.fit(model, prepared.fit_windows, rng)
    evals = models.evaluate(model, prepared.val_windows, prepared.return_scaler)
    return evaluation.metrics([p.true_rv for p in evals],
                              [p.pred_rv for p in evals]).mape


def cmd_hpo(config: ExperimentConfig, budget: int,
            space: SearchSpace | None = None) -> tuple[ExperimentConfig, list[dict]]:
    """Seeded random search over the model's space, minimizing validation MAPE."""
    if budget < 1:
        raise ConfigError("search budget must be at least 1")
    if config.model not in DEEP_MODELS:
        raise ConfigError("hyperparameter search applies to the deep models only")
    space = space or SearchSpace()
    bundle = load_features_dir(config.data_dir)
    selector = FeatureSetSelector.parse(config.features) if config.model == "dtcn" else None
    prepared = prepare(bundle, config, selector)

    rng = np.random.default_rng(config.seed)
    trials = []
    best_cfg, best_score = None, np.inf
    for trial in range(budget):
        params = space.sample(rng, config.model)
        trial_cfg = dataclasses.replace(config, **params)
        try:
            score = validation_mape(trial_cfg, prepared, seed=config.seed + trial,
                                    selector=selector)
        except models.TrainingDiverged as exc:
            log.warning("trial %d diverged: %s", trial, exc)
            score = float("nan")
        trials.append({"trial": trial, "val_mape": score, **params})
        if np.isfinite(score) and score < best_score:
            best_cfg, best_score = trial_cfg, score
    if best_cfg is None:
        raise RuntimeError("all search trials failed")

    os.makedirs(config.out_dir, exist_ok=True)
    trial_path = os.path.join(config.out_dir, "hpo_trials.csv")
    keys = sorted({k for t in trials for k in t})

    def cell(value) -> str:
        return repr(value) if isinstance(value, float) else str(value)

    with open(trial_path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for t in trials:
            fh.write(",".join(cell(t.get(k, "")) for k in keys) + "\n")
    best_path = os.path.join(config.out_dir, "best_config.txt")
    with open(best_path, "w") as fh:
        for key in ("filters", "recurrent_dim", "dropout", "epsilon", "learning_rate",
                    "weight_decay", "kernel_size", "dilation_base", "skip_connections",
                    "normalization"):
            fh.write(f"{key} = {getattr(best_cfg, key)}\n")
    return best_cfg, trials


# ---------------------------------------------------------------------------
# reporting

def cmd_report(manifest_paths, out_dir, bootstrap_seed: int = 0) -> None:
    """Tables, prediction plots with bootstrap bands, head-bias CSV and
    percentile-bucketed errors for a set of saved manifests."""
    manifests = load_manifests(manifest_paths)
    if not manifests:
        raise ConfigError("no manifests found")
    os.makedirs(out_dir, exist_ok=True)

    groups: dict[str, list[dict]] = {}
    for m in manifests:
        groups.setdefault(m["label"], []).append(m)
    for runs in groups.values():
        runs.sort(key=lambda m: m["run_index"])

    baseline_label = "arrv" if "arrv" in groups else None
    entries = []
    for label in sorted(groups):
        runs = groups[label]
        pvalues = None
        if baseline_label and label != baseline_label and len(runs) > 1:
            pvalues = {
                m: evaluation.one_sided_t(
                    [r["metrics"][m] for r in groups[baseline_label]],
                    [r["metrics"][m] for r in runs], kind="student")
                for m in evaluation.METRIC_NAMES}
        entries.append(summarize(label, runs, pvalues))
    evaluation.write_table_csv(entries, os.path.join(out_dir, "metrics_table.csv"))
    with open(os.path.join(out_dir, "metrics_table.txt"), "w") as fh:
        fh.write(evaluation.render_table(entries, baseline=baseline_label or "n/a") + "\n")

    percentile_input = {}
    for label in sorted(groups):
        runs = groups[label]
        true = np.asarray(runs[0]["true_rv"])
        preds = np.asarray([r["pred_rv"] for r in runs])
        mean_pred = preds.mean(axis=0)
        percentile_input[label] = mean_pred
        band = None
        if len(runs) >= 2:
            band = evaluation.bootstrap_band(preds, samples=1000, level=0.95,
                                             seed=bootstrap_seed)
        evaluation.plot_predictions(runs[0]["dates"], true, mean_pred, band,
                                    os.path.join(out_dir, f"predictions_{label.replace(' ', '')}.svg"),
                                    label)
        if "head_bias" in runs[0]:
            bias_path = os.path.join(out_dir, f"head_bias_{label.replace(' ', '')}.csv")
            with open(bias_path, "w") as fh:
                fh.write("time_utc,bias\n")
                for i, value in enumerate(runs[0]["head_bias"]):
                    minutes = i * 15
                    fh.write(f"{minutes // 60:02d}:{minutes % 60:02d},{value!r}\n")

    sample_true = np.asarray(next(iter(groups.values()))[0]["true_rv"])
    buckets = evaluation.percentile_mape(sample_true, percentile_input, buckets=4)
    with open(os.path.join(out_dir, "percentile_mape.csv"), "w") as fh:
        fh.write("model,q1,q2,q3,q4\n")
        for label in sorted(buckets):
            cells = ",".join(repr(v) for v in buckets[label])
            fh.write(f"{label},{cells}\n")
