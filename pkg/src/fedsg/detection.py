"""Reconstruction-error anomaly scoring, percentile thresholding,
point metrics, ROC/PR curves, and the per-client self-trained SVD
baseline.

A single sample x is scored against the learned column subspace only:
eps = ||x - U U^T x||_2. The row-subspace factor indexes training
samples and has no meaning for one new record.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import AllOneClass, EmptyInput, LengthMismatch, ShapeMismatch
from .grassmann import GrassmannPoint
from .linalg import truncated_svd


@dataclass(frozen=True)
class ScoreReport:
    errors: np.ndarray
    threshold: float

    @property
    def flags(self) -> np.ndarray:
        return self.errors > self.threshold


@dataclass(frozen=True)
class MetricsReport:
    acc: float
    pre: float
    tpr: float
    fpr: float
    f1: float
    roc: tuple = ()
    pr: tuple = ()
    auc: float = float("nan")
    degenerate: bool = False

    def as_dict(self):
        return {"acc": self.acc, "pre": self.pre, "tpr": self.tpr,
                "fpr": self.fpr, "f1": self.f1, "auc": self.auc,
                "degenerate": self.degenerate}


def score(u: GrassmannPoint, x) -> float:
    """Euclidean norm of the residual of x after projection onto span(U)."""
    xv = np.asarray(x, dtype=float).ravel()
    if xv.shape[0] != u.n:
        raise ShapeMismatch(f"sample length {xv.shape[0]} != ambient dim {u.n}")
    r = xv - u.basis @ (u.basis.T @ xv)
    return float(np.linalg.norm(r))


def score_matrix(u: GrassmannPoint, x) -> np.ndarray:
    """Column-wise scores for a d x m matrix of samples."""
    xm = np.asarray(x, dtype=float)
    if xm.shape[0] != u.n:
        raise ShapeMismatch(f"rows {xm.shape[0]} != ambient dim {u.n}")
    r = xm - u.basis @ (u.basis.T @ xm)
    return np.linalg.norm(r, axis=0)


def fit_threshold(training_errors, rho: float) -> float:
    """rho-th percentile of the sorted training errors by the nearest-rank
    method: index ceil(rho/100 * n), clamped to [1, n]."""
    errs = np.sort(np.asarray(training_errors, dtype=float))
    n = errs.shape[0]
    if n == 0:
        raise EmptyInput("no training errors")
    idx = int(np.ceil(rho / 100.0 * n))
    idx = min(max(idx, 1), n)
    return float(errs[idx - 1])


def confusion_counts(errors, labels, tau):
    errs = np.asarray(errors, dtype=float)
    labs = np.asarray(labels, dtype=bool)
    if errs.shape[0] != labs.shape[0]:
        raise LengthMismatch(f"{errs.shape[0]} errors vs {labs.shape[0]} labels")
    pred = errs > tau
    tp = int(np.sum(pred & labs))
    fp = int(np.sum(pred & ~labs))
    fn = int(np.sum(~pred & labs))
    tn = int(np.sum(~pred & ~labs))
    return tp, fp, fn, tn


def metrics_from_counts(tp, fp, fn, tn) -> MetricsReport:
    n = tp + fp + fn + tn
    degenerate = False
    acc = (tp + tn) / n if n else 0.0
    if tp + fp > 0:
        pre = tp / (tp + fp)
    else:
        pre, degenerate = 0.0, True
    if tp + fn > 0:
        tpr = tp / (tp + fn)
    else:
        tpr, degenerate = 0.0, True
    if fp + tn > 0:
        fpr = fp / (fp + tn)
    else:
        fpr, degenerate = 0.0, True
    f1 = 2.0 * pre * tpr / (pre + tpr) if pre + tpr > 0 else 0.0
    return MetricsReport(acc=acc, pre=pre, tpr=tpr, fpr=fpr, f1=f1,
                         degenerate=degenerate)


def evaluate(errors, labels, tau) -> MetricsReport:
    """Point metrics at a fixed threshold; predicted-positive is
    error > tau."""
    return metrics_from_counts(*confusion_counts(errors, labels, tau))


def roc_and_pr(errors, labels):
    """Sweep the threshold over all distinct error values plus +/-inf.

    Returns (roc points (fpr, tpr) sorted by fpr, pr points
    (recall, precision), trapezoidal AUC). Tied scores collapse to one
    sweep point, so the trapezoid equals the half-weighted pair count.
    """
    errs = np.asarray(errors, dtype=float)
    labs = np.asarray(labels, dtype=bool)
    if errs.shape[0] != labs.shape[0]:
        raise LengthMismatch(f"{errs.shape[0]} errors vs {labs.shape[0]} labels")
    n_pos = int(np.sum(labs))
    n_neg = int(np.sum(~labs))
    if n_pos == 0 or n_neg == 0:
        raise AllOneClass("both classes required for ROC/PR")

    thresholds = np.concatenate(([np.inf], np.unique(errs)[::-1], [-np.inf]))
    roc = []
    pr = []
    for tau in thresholds:
        tp, fp, fn, tn = confusion_counts(errs, labs, tau)
        roc.append((fp / n_neg, tp / n_pos))
        if tp + fp > 0:
            pr.append((tp / n_pos, tp / (tp + fp)))
    # precision at recall 0: first attained point.
    if pr and pr[0][0] > 0.0:
        pr.insert(0, (0.0, pr[0][1]))
    roc.sort()
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(roc[:-1], roc[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return tuple(roc), tuple(pr), float(auc)


def self_svd_baseline(train_shards, test_sets, k: int, rho: float):
    """Each client fits a rank-k SVD of its own benign shard, scores and
    thresholds locally, and the server aggregates the confusion counts.

    test_sets is one (matrix d x m_i, bool labels) pair per client.
    Returns (MetricsReport with pooled-score ROC/AUC, pooled errors,
    pooled labels)."""
    if len(train_shards) != len(test_sets):
        raise LengthMismatch("one test assignment per client required")
    totals = np.zeros(4, dtype=int)
    pooled_errs = []
    pooled_labels = []
    for shard, (test_x, test_y) in zip(train_shards, test_sets):
        shard = np.asarray(shard, dtype=float)
        u = GrassmannPoint(truncated_svd(shard, k).u)
        train_errs = score_matrix(u, shard)
        tau = fit_threshold(train_errs, rho)
        errs = score_matrix(u, test_x)
        totals += np.array(confusion_counts(errs, test_y, tau))
        pooled_errs.append(errs)
        pooled_labels.append(np.asarray(test_y, dtype=bool))
    errs = np.concatenate(pooled_errs)
    labels = np.concatenate(pooled_labels)
    point = metrics_from_counts(*totals)
    roc, pr, auc = roc_and_pr(errs, labels)
    report = MetricsReport(acc=point.acc, pre=point.pre, tpr=point.tpr,
                           fpr=point.fpr, f1=point.f1, roc=roc, pr=pr,
                           auc=auc, degenerate=point.degenerate)
    return report, errs, labels


def write_metrics(report: MetricsReport, json_path=None, csv_path=None):
    flat = report.as_dict()
    if json_path:
        with open(json_path, "w") as fh:
            json.dump(flat, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "value"])
            for key, val in sorted(flat.items()):
                w.writerow([key, val])


def write_curve(points, path, header):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for a, b in points:
            w.writerow([repr(float(a)), repr(float(b))])
