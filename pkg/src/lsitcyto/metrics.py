"""Evaluation metrics: SNR improvement, confusion matrices, per-class scores, ROC/AUC."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError, UndefinedReferenceError

SNR_CAP_DB = 120.0

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def snr_db(clean: np.ndarray, estimate: np.ndarray) -> tuple[float, bool]:
    """``10 log10(sum x^2 / sum (est - x)^2)``; returns (value, capped)."""
    x = np.asarray(clean, dtype=np.float64)
    e = np.asarray(estimate, dtype=np.float64)
    if x.shape != e.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {e.shape}")
    signal = float(np.sum(x * x))
    if signal == 0.0:
        raise UndefinedReferenceError("clean reference is all zero")
    resid = float(np.sum((e - x) ** 2))
    if resid == 0.0:
        return SNR_CAP_DB, True
    return min(10.0 * math.log10(signal / resid), SNR_CAP_DB), False


@dataclass
class SnrReport:
    snr_in: np.ndarray
    snr_out: np.ndarray
    snr_imp: np.ndarray
    exact_recovery: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.snr_imp))

    @property
    def std(self) -> float:
        return float(np.std(self.snr_imp))

    @property
    def mean_in(self) -> float:
        return float(np.mean(self.snr_in))

    @property
    def mean_out(self) -> float:
        return float(np.mean(self.snr_out))


def snr_imp(clean, noisy, denoised) -> SnrReport:
    """SNR improvement ``SNR_out - SNR_in`` for one image or a stack.

    A 2-D input is one image; higher-rank input is treated as a stack along
    axis 0 and summed per image before averaging.
    """
    clean = np.asarray(clean)
    noisy = np.asarray(noisy)
    denoised = np.asarray(denoised)
    if not clean.shape == noisy.shape == denoised.shape:
        raise DimensionError(f"shapes differ: {clean.shape}, {noisy.shape}, {denoised.shape}")
    if clean.ndim <= 2:
        clean, noisy, denoised = clean[None], noisy[None], denoised[None]
    n = clean.shape[0]
    s_in = np.empty(n)
    s_out = np.empty(n)
    flag = np.zeros(n, dtype=bool)
    for i in range(n):
        s_in[i], _ = snr_db(clean[i], noisy[i])
        s_out[i], flag[i] = snr_db(clean[i], denoised[i])
    return SnrReport(s_in, s_out, s_out - s_in, flag)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # [true, predicted]
    class_names: list[str] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    def per_class_recall(self) -> np.ndarray:
        rows = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, np.diag(self.counts) / np.maximum(rows, 1), np.nan)

    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else float("nan")


def confusion(trues, preds, n_classes: int, class_names=None) -> ConfusionMatrix:
    trues = np.asarray(trues, dtype=np.int64)
    preds = np.asarray(preds, dtype=np.int64)
    if trues.shape != preds.shape:
        raise DimensionError("trues and preds differ in length")
    if trues.size and (trues.min() < 0 or trues.max() >= n_classes or preds.min() < 0 or preds.max() >= n_classes):
        raise DataError(f"label outside [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (trues, preds), 1)
    names = list(class_names) if class_names is not None else [str(i) for i in range(n_classes)]
    return ConfusionMatrix(counts, names)


def _ratio(num: float, den: float) -> float | None:
    return None if den == 0 else num / den


@dataclass(frozen=True)
class ClassMetrics:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def accuracy(self):
        return _ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn)

    @property
    def precision(self):
        return _ratio(self.tp, self.tp + self.fp)

    ppv = precision

    @property
    def recall(self):
        return _ratio(self.tp, self.tp + self.fn)

    sensitivity = recall

    @property
    def specificity(self):
        return _ratio(self.tn, self.tn + self.fp)

    @property
    def npv(self):
        return _ratio(self.tn, self.tn + self.fn)

    @property
    def f1(self):
        p, r = self.precision, self.recall
        if p is None or r is None:
            return None
        return _ratio(2 * p * r, p + r)

    FIELDS = ("accuracy", "precision", "recall", "specificity", "sensitivity", "f1", "ppv", "npv")

    def as_dict(self) -> dict:
        out = {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}
        out.update({k: getattr(self, k) for k in self.FIELDS})
        return out


def class_metrics(cm: ConfusionMatrix) -> list[ClassMetrics]:
    c = np.asarray(cm.counts if isinstance(cm, ConfusionMatrix) else cm, dtype=np.int64)
    if c.size == 0:
        raise DataError("empty confusion matrix")
    total = int(c.sum())
    out = []
    for k in range(c.shape[0]):
        tp = int(c[k, k])
        fn = int(c[k].sum()) - tp
        fp = int(c[:, k].sum()) - tp
        out.append(ClassMetrics(tp, total - tp - fn - fp, fp, fn))
    return out


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def roc_curve(scores, positives) -> RocCurve:
    """One-vs-rest ROC for a single class: threshold sweep over distinct scores."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(positives, dtype=bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both positive and negative samples")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    tps = np.cumsum(y_sorted)
    fps = np.cumsum(~y_sorted)
    # keep the last index of every run of tied scores
    last = np.r_[np.flatnonzero(np.diff(s_sorted)), len(s_sorted) - 1]
    tpr = np.r_[0.0, tps[last] / n_pos]
    fpr = np.r_[0.0, fps[last] / n_neg]
    thr = np.r_[np.inf, s_sorted[last]]
    return RocCurve(fpr, tpr, thr, float(_trapezoid(tpr, fpr)))


def roc_auc(probs, trues, n_classes: int | None = None) -> list[RocCurve]:
    """Per-class one-vs-rest ROC curves from softmax probability vectors."""
    p = np.asarray(probs, dtype=np.float64)
    t = np.asarray(trues, dtype=np.int64)
    if p.ndim != 2 or p.shape[0] != t.shape[0]:
        raise DimensionError(f"probabilities {p.shape} do not match {t.shape[0]} labels")
    k = n_classes or p.shape[1]
    return [roc_curve(p[:, c], t == c) for c in range(k)]


def pairwise_auc(scores, positives) -> float:
    """Probability that a positive outranks a negative (ties count one half)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(positives, dtype=bool)
    pos, neg = s[y], s[~y]
    if len(pos) == 0 or len(neg) == 0:
        raise DataError("need both classes")
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / (len(pos) * len(neg)))


# ---------------------------------------------------------------------------
# CSV emitters


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6f}"
    return str(v)


def write_confusion_csv(path, cm: ConfusionMatrix) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["true\\pred", *cm.class_names])
        for name, row in zip(cm.class_names, cm.counts):
            w.writerow([name, *map(int, row)])


def write_metrics_csv(path, cm: ConfusionMatrix) -> None:
    recall = cm.per_class_recall()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "tp", "tn", "fp", "fn", *ClassMetrics.FIELDS, "class_recall"])
        for name, m, r in zip(cm.class_names, class_metrics(cm), recall):
            d = m.as_dict()
            w.writerow([name, d["tp"], d["tn"], d["fp"], d["fn"], *(_fmt(d[k]) for k in ClassMetrics.FIELDS), _fmt(None if np.isnan(r) else r)])


def write_roc_csv(path, curves: list[RocCurve], class_names) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "auc", "fpr", "tpr", "threshold"])
        for name, c in zip(class_names, curves):
            for f, t, th in zip(c.fpr, c.tpr, c.thresholds):
                w.writerow([name, _fmt(c.auc), _fmt(f), _fmt(t), "inf" if np.isinf(th) else _fmt(th)])


def write_snr_csv(path, report: SnrReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "snr_in_db", "snr_out_db", "snr_imp_db", "exact_recovery"])
        for i, (a, b, c, f) in enumerate(zip(report.snr_in, report.snr_out, report.snr_imp, report.exact_recovery)):
            w.writerow([i, _fmt(a), _fmt(b), _fmt(c), int(f)])
