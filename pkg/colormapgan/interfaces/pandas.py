"""Export reports, statistics and training histories as `pandas.DataFrame` objects."""

from typing import Sequence

import pandas as pd

from ..dataset import DatasetStats
from ..metrics import IoUReport
from ..raster import CLASS_NAMES, FOREGROUND


def reports_to_frame(reports: Sequence[IoUReport], labels: Sequence[str] | None = None) -> pd.DataFrame:
    """One row per report with the foreground IoUs and the overall score."""
    labels = [f"run {n}" for n in range(len(reports))] if labels is None else list(labels)
    columns = [*(CLASS_NAMES[c] for c in FOREGROUND), "overall"]
    return pd.DataFrame([report.row() for report in reports], index=labels, columns=columns)


def stats_to_frame(stats: DatasetStats) -> pd.DataFrame:
    frame = pd.DataFrame(
        {"pixels": stats.counts, "frequency": list(stats.frequencies.values())},
        index=list(CLASS_NAMES),
    )
    frame.attrs["patches"] = stats.patches
    frame.attrs["area_km2"] = stats.area_km2
    return frame


def history_to_frame(history: dict[str, list] | list[float]) -> pd.DataFrame:
    """A loss history indexed by iteration, starting at 1.

    Segmenter histories (plain lists of losses) become a single "loss" column.
    """
    if not isinstance(history, dict):
        history = {"loss": list(history)}
    frame = pd.DataFrame(history)
    frame.index = pd.RangeIndex(1, len(frame) + 1, name="iteration")
    return frame
