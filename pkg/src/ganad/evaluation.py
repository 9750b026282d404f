"""Metrics, threshold selection, sweeps, ablations, and inference benchmarks.

AUC is computed with the rank-based Mann-Whitney estimator (ties counted
1/2), which coincides exactly with the trapezoidal integral of the ROC
curve built from all distinct thresholds. Anomalous is the positive class
throughout; a score at or above the threshold predicts anomalous.
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from ganad.errors import ConfigError
from ganad.scoring import ScoreWeights, combine, score_dataset

METRIC_NAMES = ("auc", "sensitivity", "specificity", "f1", "accuracy")


def _check_scores_labels(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ConfigError("scores and labels must be equal-length 1-D sequences")
    if set(np.unique(labels)) != {0, 1}:
        raise ConfigError(f"labels must contain both classes, found {sorted(set(labels.tolist()))}")
    return scores, labels


def roc_auc(scores, labels):
    """AUC (Mann-Whitney, ties 1/2) and the ROC polyline over all thresholds.

    Returns (auc, roc_points) with roc_points a list of (fpr, tpr) running
    from (0, 0) to (1, 1).
    """
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    ranks = rankdata(scores)  # average ranks handle ties as 1/2 wins
    auc = (ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    tp = np.cumsum(sorted_labels)
    fp = np.cumsum(1 - sorted_labels)
    # keep only the last index of each tied score block
    distinct = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    tpr = tp[distinct] / n_pos
    fpr = fp[distinct] / n_neg
    points = [(0.0, 0.0)] + list(zip(fpr.tolist(), tpr.tolist()))
    return float(auc), points


def trapezoid_auc(roc_points) -> float:
    """Trapezoidal integral of an ROC polyline (internal cross-check)."""
    xs = np.array([p[0] for p in roc_points])
    ys = np.array([p[1] for p in roc_points])
    return float(np.trapezoid(ys, xs))


def select_threshold(scores, labels) -> float:
    """Threshold maximizing Youden's J; ties broken toward higher specificity.

    Candidates are midpoints between consecutive distinct scores plus
    sentinels outside the score range, so a perfectly separating threshold
    sits strictly between the two classes' scores.
    """
    scores, labels = _check_scores_labels(scores, labels)
    uniq = np.unique(scores)
    candidates = [uniq[0] - 1.0]
    candidates += ((uniq[1:] + uniq[:-1]) / 2.0).tolist()
    candidates.append(uniq[-1] + 1.0)
    best_t, best_j, best_spec = None, -np.inf, -np.inf
    n_pos = labels.sum()
    n_neg = len(labels) - n_pos
    for t in candidates:
        pred = scores >= t
        tp = int(np.sum(pred & (labels == 1)))
        tn = int(np.sum(~pred & (labels == 0)))
        sens = tp / n_pos
        spec = tn / n_neg
        j = sens + spec - 1.0
        if j > best_j + 1e-12 or (abs(j - best_j) <= 1e-12 and spec > best_spec):
            best_t, best_j, best_spec = t, j, spec
    return float(best_t)


def confusion_metrics(scores, labels, threshold) -> dict:
    """Sensitivity/specificity/F1/accuracy at a threshold.

    A metric with a zero denominator is reported as None (undefined),
    which is distinct from 0.
    """
    scores, labels = _check_scores_labels(scores, labels)
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    fn = int(np.sum(~pred & (labels == 1)))
    tn = int(np.sum(~pred & (labels == 0)))
    fp = int(np.sum(pred & (labels == 0)))

    def ratio(num, den):
        return num / den if den > 0 else None

    return {
        "sensitivity": ratio(tp, tp + fn),
        "specificity": ratio(tn, tn + fp),
        "f1": ratio(2 * tp, 2 * tp + fp + fn),
        "accuracy": ratio(tp + tn, len(labels)),
        "tp": tp,
        "fn": fn,
        "tn": tn,
        "fp": fp,
    }


@dataclass
class EvaluationReport:
    experiment: str
    seed: int
    auc: float
    sensitivity: float | None
    specificity: float | None
    f1: float | None
    accuracy: float | None
    threshold: float
    threshold_source: str  # "validation" or "test-oracle"
    n_items: int
    roc_points: list = field(default_factory=list)
    component_means: dict = field(default_factory=dict)

    def to_json(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2))


@dataclass
class AggregateReport:
    experiment: str
    n_seeds: int
    mean: dict
    std: dict  # population standard deviation over seeds
    component_means: dict = field(default_factory=dict)

    def to_json(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2))


def _scored_arrays(scored):
    ok = [(it, bd) for it, bd in scored if bd is not None]
    labels = np.array([it.anomaly_label for it, _ in ok], dtype=int)
    comps = np.array([[bd.discrimination, bd.residual, bd.latent] for _, bd in ok], dtype=float)
    totals = np.array([bd.total for _, bd in ok], dtype=float)
    return labels, comps, totals


def evaluate_split(bundle, splits, w: ScoreWeights, experiment: str = "", seed: int = 0) -> EvaluationReport:
    """Score the test split and report all metrics.

    The threshold is chosen on the validation split when it contains both
    labels; otherwise it is chosen on the test split itself and flagged as
    "test-oracle" in the report.
    """
    bundle.eval_mode()
    scored = score_dataset(splits.test, bundle, w)
    labels, comps, totals = _scored_arrays(scored)
    auc, points = roc_auc(totals, labels)

    val_labels = {it.anomaly_label for it in splits.validation}
    if val_labels == {0, 1}:
        val_scored = score_dataset(splits.validation, bundle, w)
        v_labels, _, v_totals = _scored_arrays(val_scored)
        threshold = select_threshold(v_totals, v_labels)
        source = "validation"
    else:
        threshold = select_threshold(totals, labels)
        source = "test-oracle"
    cm = confusion_metrics(totals, labels, threshold)
    return EvaluationReport(
        experiment=experiment,
        seed=seed,
        auc=auc,
        sensitivity=cm["sensitivity"],
        specificity=cm["specificity"],
        f1=cm["f1"],
        accuracy=cm["accuracy"],
        threshold=threshold,
        threshold_source=source,
        n_items=len(labels),
        roc_points=points,
        component_means={
            "discrimination": float(comps[:, 0].mean()),
            "residual": float(comps[:, 1].mean()),
            "latent": float(comps[:, 2].mean()),
        },
    )


def lambda_sweep(bundle, splits, lambdas, beta: float):
    """AUC as a function of lambda, from one pass of cached components.

    Items are scored once; totals for each lambda are recombined from the
    cached component breakdown, which is exactly equivalent to re-scoring.
    """
    if any(not 0.0 <= lam <= 1.0 for lam in lambdas):
        raise ConfigError("all lambdas must lie in [0, 1]")
    bundle.eval_mode()
    scored = score_dataset(splits.test, bundle, ScoreWeights(lam=0.5, beta=beta))
    labels, comps, _ = _scored_arrays(scored)
    out = []
    for lam in lambdas:
        totals = lam * comps[:, 0] + (1.0 - lam) * comps[:, 1] + beta * comps[:, 2]
        auc, _ = roc_auc(totals, labels)
        out.append((float(lam), auc))
    return out


def aggregate_seeds(reports) -> AggregateReport:
    """Per-metric mean and population std over same-experiment reports."""
    reports = list(reports)
    if not reports:
        raise ConfigError("need at least one report")
    experiments = {r.experiment for r in reports}
    if len(experiments) != 1:
        raise ConfigError(f"mixed experiment identities: {sorted(experiments)}")
    mean, std = {}, {}
    for name in METRIC_NAMES:
        values = [getattr(r, name) for r in reports]
        if any(v is None for v in values):
            mean[name], std[name] = None, None
            continue
        mean[name] = statistics.fmean(values)
        std[name] = statistics.pstdev(values)
    comp_names = reports[0].component_means.keys()
    comp_means = {
        c: statistics.fmean([r.component_means[c] for r in reports]) for c in comp_names
    }
    return AggregateReport(
        experiment=reports[0].experiment,
        n_seeds=len(reports),
        mean=mean,
        std=std,
        component_means=comp_means,
    )


def ablate(bundles, splits, mode: str, weights: ScoreWeights, alt_bundles=None):
    """Paired ablation reports.

    mode "latent": the same checkpoints scored with beta=0 vs the default
    beta. mode "gan_objective": two checkpoint sets (e.g. SGAN- vs
    RSGAN-trained), both scored with the default weights; `alt_bundles`
    supplies the second set.
    """
    bundles = list(bundles)
    if mode == "latent":
        base = [
            evaluate_split(b, splits, ScoreWeights(lam=weights.lam, beta=0.0), experiment="beta=0", seed=i)
            for i, b in enumerate(bundles)
        ]
        full = [
            evaluate_split(b, splits, weights, experiment=f"beta={weights.beta}", seed=i)
            for i, b in enumerate(bundles)
        ]
        return aggregate_seeds(base), aggregate_seeds(full)
    if mode == "gan_objective":
        if not alt_bundles:
            raise ConfigError("gan_objective ablation needs a second checkpoint set")
        alt_bundles = list(alt_bundles)
        for a, b in zip(bundles, alt_bundles):
            if a.config != b.config:
                raise ConfigError("compared checkpoints have mismatched architectures")
        first = [
            evaluate_split(b, splits, weights, experiment="objective_a", seed=i) for i, b in enumerate(bundles)
        ]
        second = [
            evaluate_split(b, splits, weights, experiment="objective_b", seed=i)
            for i, b in enumerate(alt_bundles)
        ]
        return aggregate_seeds(first), aggregate_seeds(second)
    raise ConfigError(f"unknown ablation mode {mode!r}")


def bench_inference(scorers, items, repetitions: int = 3, warmup: int = 1):
    """Median per-item wall time (ms) for each named scorer.

    `scorers` is a sequence of (name, callable) where the callable scores
    one pre-decoded item. Warm-up passes are excluded; a failing scorer is
    recorded with an error instead of a timing.
    """
    if repetitions < 3:
        raise ConfigError(f"repetitions must be >= 3, got {repetitions}")
    items = list(items)
    rows = []
    for name, fn in scorers:
        try:
            for _ in range(warmup):
                fn(items[0])
            per_rep = []
            for _ in range(repetitions):
                t0 = time.perf_counter()
                for it in items:
                    fn(it)
                per_rep.append((time.perf_counter() - t0) * 1000.0 / len(items))
            rows.append({"name": name, "median_ms_per_item": statistics.median(per_rep), "error": None})
        except Exception as exc:  # noqa: BLE001 - benchmark must survive scorer failures
            rows.append({"name": name, "median_ms_per_item": None, "error": f"{type(exc).__name__}: {exc}"})
    return rows


def write_sweep_csv(path, sweep):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "auc"])
        for lam, auc in sweep:
            writer.writerow([lam, auc])


def write_roc_csv(path, roc_points):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for fpr, tpr in roc_points:
            writer.writerow([fpr, tpr])


def plot_roc(path, roc_points, title="ROC"):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot([p[0] for p in roc_points], [p[1] for p in roc_points], label="model")
    ax.plot([0, 1], [0, 1], "k--", lw=0.8, label="chance")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_score_histogram(path, scores, labels, title="Anomaly scores"):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.hist(scores[labels == 0], bins=30, alpha=0.6, label="normal")
    ax.hist(scores[labels == 1], bins=30, alpha=0.6, label="anomalous")
    ax.set_xlabel("anomaly score")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_per_class_csv(path, rows):
    """Per-class AUC bar data: rows of (class_id, auc)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class_id", "auc"])
        for cid, auc in rows:
            writer.writerow([cid, auc])
