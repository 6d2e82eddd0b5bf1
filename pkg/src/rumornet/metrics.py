"""Classification metrics: accuracy and per-class F1, rumor = positive."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    f1_rumor: float
    f1_nonrumor: float
    per_fold: list["MetricsReport"] = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def mean_accuracy(self) -> float:
        """Mean of per-fold accuracies; pooled accuracy if no folds recorded."""
        if not self.per_fold:
            return self.accuracy
        return sum(r.accuracy for r in self.per_fold) / len(self.per_fold)

    def mean_f1_rumor(self) -> float:
        if not self.per_fold:
            return self.f1_rumor
        return sum(r.f1_rumor for r in self.per_fold) / len(self.per_fold)

    def mean_f1_nonrumor(self) -> float:
        if not self.per_fold:
            return self.f1_nonrumor
        return sum(r.f1_nonrumor for r in self.per_fold) / len(self.per_fold)


def _f1(tp: int, fp: int, fn: int) -> float:
    """2PR / (P + R), defined as 0 when the denominator vanishes."""
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2 * tp / denom


def evaluate(predictions: list[tuple[float, int]], threshold: float = 0.5) -> MetricsReport:
    """Score (y_hat, label) pairs; predict rumor iff y_hat >= threshold."""
    if not predictions:
        raise ValueError("evaluate: empty prediction list")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"evaluate: threshold must be in (0, 1), got {threshold}")
    tp = fp = tn = fn = 0
    for y_hat, label in predictions:
        predicted = 1 if y_hat >= threshold else 0
        if predicted == 1 and label == 1:
            tp += 1
        elif predicted == 1 and label == 0:
            fp += 1
        elif predicted == 0 and label == 0:
            tn += 1
        else:
            fn += 1
    total = tp + fp + tn + fn
    return MetricsReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=(tp + tn) / total,
        f1_rumor=_f1(tp, fp, fn),
        # Non-rumor as positive class: its TP are the TN above.
        f1_nonrumor=_f1(tn, fn, fp),
    )


def aggregate_folds(fold_reports: list[MetricsReport]) -> MetricsReport:
    """Pool confusion counts over folds and keep the per-fold breakdown."""
    tp = sum(r.tp for r in fold_reports)
    fp = sum(r.fp for r in fold_reports)
    tn = sum(r.tn for r in fold_reports)
    fn = sum(r.fn for r in fold_reports)
    total = tp + fp + tn + fn
    return MetricsReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=(tp + tn) / total,
        f1_rumor=_f1(tp, fp, fn),
        f1_nonrumor=_f1(tn, fn, fp),
        per_fold=list(fold_reports),
    )


def report_csv(report: MetricsReport, variant: str) -> str:
    """CSV rows: variant, fold, accuracy, f1_rumor, f1_nonrumor.

    Per-fold rows first (if any), then a summary row with fold "mean"
    carrying the across-fold means.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["variant", "fold", "accuracy", "f1_rumor", "f1_nonrumor"])
    for i, fold in enumerate(report.per_fold):
        writer.writerow(
            [variant, i, f"{fold.accuracy:.6f}", f"{fold.f1_rumor:.6f}", f"{fold.f1_nonrumor:.6f}"]
        )
    writer.writerow(
        [
            variant,
            "mean",
            f"{report.mean_accuracy():.6f}",
            f"{report.mean_f1_rumor():.6f}",
            f"{report.mean_f1_nonrumor():.6f}",
        ]
    )
    return buf.getvalue()


def render_table(reports: dict[str, MetricsReport]) -> str:
    """Fixed-width table shaped like the usual method/class results grids."""
    lines = [f"{'Method':<32}{'Class':<8}{'Accuracy':<12}{'F1':<10}"]
    lines.append("-" * 62)
    for name, report in reports.items():
        acc = f"{report.mean_accuracy():.3f}"
        lines.append(f"{name:<32}{'R':<8}{acc:<12}{report.mean_f1_rumor():<10.3f}")
        lines.append(f"{'':<32}{'N':<8}{'':<12}{report.mean_f1_nonrumor():<10.3f}")
    return "\n".join(lines)
