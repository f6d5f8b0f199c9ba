"""Metrics, cross-run statistics, bootstrap bands and table rendering.

Error metrics operate on daily realized-volatility pairs. Cross-run
comparisons use one-sided t-tests: a one-sample test against a
deterministic baseline score, a pooled two-sample Student test, or
Welch's unequal-variance test. Confidence bands bootstrap over runs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

SIGNIFICANCE_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"), (0.1, "."))
METRIC_NAMES = ("mape", "mae", "rmse", "msle")


@dataclass(frozen=True)
class MetricVector:
    """The four error metrics of one evaluation run."""

    mape: float
    mae: float
    rmse: float
    msle: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def metrics(y, y_hat) -> MetricVector:
    """Evaluate all four error formulas on (true, predicted) RV pairs.

    A non-positive true value makes the relative and logarithmic errors
    undefined; those entries come back as NaN for the run.
    """
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1 or y.size < 1:
        raise ValueError(f"need equal-length 1-D arrays, got {y.shape} and {y_hat.shape}")
    diff = y - y_hat
    mae = float(np.mean(np.abs(diff)))
    rmse = float(np.sqrt(np.mean(diff * diff)))
    if np.any(y <= 0):
        mape = float("nan")
        msle = float("nan")
    else:
        mape = float(np.mean(np.abs(diff / y)))
        log_diff = np.log(y + 1.0) - np.log(y_hat + 1.0)
        msle = float(np.mean(log_diff * log_diff))
    return MetricVector(mape=mape, mae=mae, rmse=rmse, msle=msle)


def one_sided_t(baseline_scores, model_scores, kind: str = "student") -> float:
    """p-value for the alternative "model mean is below baseline mean".

    ``student`` runs a one-sample test when the baseline is a single
    deterministic score, otherwise a pooled two-sample test; ``welch``
    drops the equal-variance assumption.
    """
    baseline = np.atleast_1d(np.asarray(baseline_scores, dtype=np.float64))
    model = np.atleast_1d(np.asarray(model_scores, dtype=np.float64))
    if model.size < 2:
        raise ValueError("model sample needs at least two scores")
    if kind not in ("student", "welch"):
        raise ValueError(f"unknown test kind {kind!r}")

    var_m = float(model.var(ddof=1))
    mean_m = float(model.mean())

    if kind == "student" and baseline.size == 1:
        if var_m == 0.0:
            raise ValueError("zero variance in both samples")
        stat = (mean_m - float(baseline[0])) / math.sqrt(var_m / model.size)
        return float(student_t.cdf(stat, df=model.size - 1))

    if baseline.size < 2:
        raise ValueError(f"{kind} two-sample test needs at least two baseline scores")
    var_b = float(baseline.var(ddof=1))
    mean_b = float(baseline.mean())
    if var_m == 0.0 and var_b == 0.0:
        raise ValueError("zero variance in both samples")
    n_m, n_b = model.size, baseline.size

    if kind == "student":
        df = n_m + n_b - 2
        pooled = ((n_m - 1) * var_m + (n_b - 1) * var_b) / df
        se = math.sqrt(pooled * (1.0 / n_m + 1.0 / n_b))
    else:
        se_m, se_b = var_m / n_m, var_b / n_b
        se = math.sqrt(se_m + se_b)
        df = (se_m + se_b) ** 2 / (
            se_m**2 / (n_m - 1) + se_b**2 / (n_b - 1))
    stat = (mean_m - mean_b) / se
    return float(student_t.cdf(stat, df=df))


def significance_code(p: float) -> str:
    for threshold, code in SIGNIFICANCE_LEVELS:
        if p < threshold:
            return code
    return ""


@dataclass(frozen=True)
class BootstrapBand:
    """Per-day percentile interval over resampled cross-run means."""

    lower: np.ndarray
    upper: np.ndarray
    mean: np.ndarray


def bootstrap_band(per_run_predictions, samples: int = 1000, level: float = 0.95,
                   seed: int = 0) -> BootstrapBand:
    """Resample runs with replacement and band the per-day means."""
    preds = np.asarray(per_run_predictions, dtype=np.float64)
    if preds.ndim != 2 or preds.shape[0] < 2:
        raise ValueError("need a (runs, days) array with at least two runs")
    rng = np.random.default_rng(seed)
    runs = preds.shape[0]
    idx = rng.integers(0, runs, size=(samples, runs))
    means = preds[idx].mean(axis=1)
    tail = (1.0 - level) / 2.0 * 100.0
    return BootstrapBand(
        lower=np.percentile(means, tail, axis=0),
        upper=np.percentile(means, 100.0 - tail, axis=0),
        mean=preds.mean(axis=0),
    )


def percentile_mape(y, y_hat_per_model: dict, buckets: int = 4) -> dict:
    """MAPE restricted to percentile buckets of the true values.

    Bucket edges are the inner percentiles of y (quartiles for four
    buckets); an empty bucket reports NaN.
    """
    y = np.asarray(y, dtype=np.float64)
    edges = np.percentile(y, np.linspace(0, 100, buckets + 1)[1:-1])
    assignment = np.searchsorted(edges, y, side="left")
    out = {}
    for label, preds in y_hat_per_model.items():
        preds = np.asarray(preds, dtype=np.float64)
        scores = []
        for b in range(buckets):
            mask = assignment == b
            if not mask.any():
                scores.append(float("nan"))
            else:
                scores.append(float(np.mean(np.abs((y[mask] - preds[mask]) / y[mask]))))
        out[label] = scores
    return out


@dataclass
class SignificanceEntry:
    """One table row: per-metric mean, spread and p-value versus baseline."""

    label: str
    means: dict
    stds: dict            # zero spread for deterministic models
    pvalues: dict | None  # None for the baseline row itself
    runs: int = 1

    def code(self, metric: str) -> str:
        if self.pvalues is None:
            return ""
        return significance_code(self.pvalues[metric])


def render_table(entries: list[SignificanceEntry], baseline: str) -> str:
    """Fixed-width text table: mean +/- std with significance stars."""
    lines = []
    header = f"{'model':<28}" + "".join(f"{m.upper():<22}" for m in METRIC_NAMES)
    lines.append(header)
    lines.append("-" * len(header))
    for entry in entries:
        cells = []
        for m in METRIC_NAMES:
            cell = f"{entry.means[m]:.4f}"
            if entry.runs > 1:
                cell += f" ± {entry.stds[m]:.4f}"
            star = entry.code(m)
            if star:
                cell += f" {star}"
            cells.append(f"{cell:<22}")
        lines.append(f"{entry.label:<28}" + "".join(cells))
    lines.append("")
    lines.append(f"one-sided t-tests against {baseline}; "
                 "codes: *** <0.001, ** <0.01, * <0.05, . <0.1")
    return "\n".join(lines)


def write_table_csv(entries: list[SignificanceEntry], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["model", "runs"]
        for m in METRIC_NAMES:
            header += [f"{m}_mean", f"{m}_std", f"{m}_p", f"{m}_code"]
        writer.writerow(header)
        for entry in entries:
            row = [entry.label, entry.runs]
            for m in METRIC_NAMES:
                p = "" if entry.pvalues is None else repr(entry.pvalues[m])
                row += [repr(entry.means[m]), repr(entry.stds[m]), p, entry.code(m)]
            writer.writerow(row)


def plot_predictions(dates, true_rv, mean_pred, band: BootstrapBand | None,
                     path, label: str) -> None:
    """True vs predicted RV line plot with an optional band polygon (SVG)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "btcvol"
    fig, ax = plt.subplots(figsize=(8, 4))
    x = np.arange(len(true_rv))
    ax.plot(x, true_rv, color="black", label="true RV")
    ax.plot(x, mean_pred, color="tab:blue", label=f"{label} prediction")
    if band is not None:
        ax.fill_between(x, band.lower, band.upper, color="tab:blue", alpha=0.25,
                        label="95% bootstrap band")
    step = max(len(dates) // 8, 1)
    ax.set_xticks(x[::step])
    ax.set_xticklabels([str(d) for d in dates[::step]], rotation=30, fontsize=7)
    ax.set_ylabel("daily realized volatility")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
