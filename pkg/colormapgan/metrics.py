"""Intersection over union, aggregation of repeated runs, and class colour histograms."""

from typing import Sequence

import numpy as np

from .exceptions import EmptyDatasetError, ShapeMismatchError
from .format import format_csv, format_percentage, format_table
from .raster import CLASS_NAMES, FOREGROUND, N_CLASSES, check_image, check_mask


class IoUReport:
    """Per-class intersection, union and IoU, background included.

    `overall` is the mean IoU of the three foreground classes. A class absent from
    both prediction and ground truth has IoU 1. Reports averaged over runs hold the
    summed counts of the runs and the mean IoUs.
    """

    __slots__ = ("intersection", "union", "iou", "confusion", "runs")

    def __init__(
        self,
        intersection: np.ndarray,
        union: np.ndarray,
        iou: np.ndarray | None = None,
        confusion: np.ndarray | None = None,
        runs: int = 1,
    ):
        self.intersection = np.asarray(intersection, dtype=np.int64)
        self.union = np.asarray(union, dtype=np.int64)
        if iou is None:
            iou = np.ones(N_CLASSES)
            present = self.union > 0
            iou[present] = self.intersection[present] / self.union[present]
        self.iou = np.asarray(iou, dtype=np.float64)
        self.confusion = confusion
        self.runs = runs

    @property
    def overall(self) -> float:
        return float(self.iou[list(FOREGROUND)].mean())

    def by_class(self) -> dict[str, float]:
        return {CLASS_NAMES[c]: float(self.iou[c]) for c in FOREGROUND}

    def __repr__(self):
        scores = ", ".join(f"{name}={value:.4f}" for name, value in self.by_class().items())
        return f"IoUReport({scores}, overall={self.overall:.4f})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, IoUReport):
            return NotImplemented
        return (
            np.array_equal(self.intersection, other.intersection)
            and np.array_equal(self.union, other.union)
            and np.array_equal(self.iou, other.iou)
        )

    def row(self) -> list[float]:
        return [*self.by_class().values(), self.overall]

    def to_text(self, label: str = "IoU (%)") -> str:
        return reports_table([self], [label])

    def to_csv(self, label: str = "run") -> str:
        return reports_csv([self], [label])


def reports_table(reports: Sequence[IoUReport], labels: Sequence[str]) -> str:
    """Plain-text table with one row of percentages per report."""
    header = ["", *(CLASS_NAMES[c] for c in FOREGROUND), "Overall"]
    rows = [[label, *(format_percentage(v) for v in report.row())] for report, label in zip(reports, labels)]
    return format_table(header, rows)


def reports_csv(reports: Sequence[IoUReport], labels: Sequence[str]) -> str:
    header = ["label", *(CLASS_NAMES[c] for c in FOREGROUND), "overall"]
    return format_csv(header, [[label, *(f"{v:.6f}" for v in report.row())] for report, label in zip(reports, labels)])


def confusion_matrix(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Pixel counts indexed by (ground-truth class, predicted class)."""
    pred = check_mask(pred)
    gt = check_mask(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"Prediction {pred.shape} and ground truth {gt.shape} differ in extent")
    flat = gt.ravel().astype(np.int64) * N_CLASSES + pred.ravel()
    return np.bincount(flat, minlength=N_CLASSES**2).reshape(N_CLASSES, N_CLASSES)


def iou_from_confusion(confusion: np.ndarray) -> IoUReport:
    intersection = np.diag(confusion)
    union = confusion.sum(axis=0) + confusion.sum(axis=1) - intersection
    return IoUReport(intersection, union, confusion=confusion)


def iou(pred: np.ndarray, gt: np.ndarray) -> IoUReport:
    return iou_from_confusion(confusion_matrix(pred, gt))


def iou_over_rasters(preds: Sequence[np.ndarray], gts: Sequence[np.ndarray]) -> IoUReport:
    """One report over several rasters, counting their pixels together."""
    if len(preds) == 0 or len(preds) != len(gts):
        raise ShapeMismatchError(f"Need matching non-empty lists of masks, got {len(preds)} and {len(gts)}")
    return iou_from_confusion(sum(confusion_matrix(p, g) for p, g in zip(preds, gts)))


def mean_iou_over_runs(reports: Sequence[IoUReport]) -> IoUReport:
    """Average the per-class IoUs of several runs; counts are summed."""
    if len(reports) == 0:
        raise EmptyDatasetError("mean_iou_over_runs() needs at least one report")
    if len(reports) == 1:
        return reports[0]
    return IoUReport(
        np.sum([r.intersection for r in reports], axis=0),
        np.sum([r.union for r in reports], axis=0),
        iou=np.mean([r.iou for r in reports], axis=0),
        runs=sum(r.runs for r in reports),
    )


def majority_vote(preds: Sequence[np.ndarray]) -> np.ndarray:
    """Per-pixel modal class; ties go to the smallest class id."""
    if len(preds) == 0:
        raise EmptyDatasetError("majority_vote() needs at least one mask")
    shape = preds[0].shape
    for n, pred in enumerate(preds):
        check_mask(pred)
        if pred.shape != shape:
            raise ShapeMismatchError(f"Mask {n} has extent {pred.shape}, mask 0 has {shape}")
    stacked = np.stack(preds)
    votes = np.stack([(stacked == c).sum(axis=0) for c in range(N_CLASSES)])
    # argmax returns the first maximum, i.e. the smallest id
    return votes.argmax(axis=0).astype(np.uint8)


def class_color_histograms(image: np.ndarray, mask: np.ndarray) -> dict[str, np.ndarray]:
    """Per-class level counts of each channel, as (3, 256) arrays keyed by class name."""
    check_image(image)
    mask = check_mask(mask, image)
    histograms = {}
    for c, name in enumerate(CLASS_NAMES):
        pixels = image[mask == c]
        histograms[name] = np.stack([np.bincount(pixels[:, ch], minlength=256) for ch in range(3)])
    return histograms


def histogram_distance(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> dict[str, float]:
    """Mean over channels of the L1 distance between normalised class histograms.

    Only classes with pixels on both sides are compared. The distance lies in [0, 2].
    """
    distances = {}
    for name in CLASS_NAMES:
        if name not in a or name not in b:
            continue
        total_a = a[name].sum(axis=1, keepdims=True)
        total_b = b[name].sum(axis=1, keepdims=True)
        if not (total_a.all() and total_b.all()):
            continue
        distances[name] = float(np.abs(a[name] / total_a - b[name] / total_b).sum(axis=1).mean())
    return distances
