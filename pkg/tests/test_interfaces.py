import numpy as np
import pytest

from colormapgan import class_color_histograms, dataset_stats, iou

pd = pytest.importorskip("pandas")
matplotlib = pytest.importorskip("matplotlib")
matplotlib.use("Agg")

from colormapgan.interfaces.matplotlib import plot_class_histograms, plot_history
from colormapgan.interfaces.pandas import history_to_frame, reports_to_frame, stats_to_frame


def report():
    gt = np.array([[1, 1], [2, 0]], dtype=np.uint8)
    pred = np.array([[1, 2], [2, 0]], dtype=np.uint8)
    return iou(pred, gt)


class TestPandas:
    def test_reports(self):
        frame = reports_to_frame([report(), report()], ["none", "colormapgan"])
        assert list(frame.columns) == ["building", "road", "tree", "overall"]
        assert frame.loc["none", "road"] == 0.5

    def test_default_labels(self):
        assert list(reports_to_frame([report()]).index) == ["run 0"]

    def test_stats(self):
        frame = stats_to_frame(dataset_stats([np.array([[1, 2]], dtype=np.uint8)]))
        assert frame.loc["building", "frequency"] == 50.0
        assert frame.attrs["patches"] == 1

    def test_history(self):
        frame = history_to_frame([0.5, 0.4, 0.3])
        assert frame.index[0] == 1
        assert frame["loss"].tolist() == [0.5, 0.4, 0.3]
        gan = history_to_frame({"d_loss": [0.5, 0.4], "g_loss": [0.9, 0.8]})
        assert list(gan.columns) == ["d_loss", "g_loss"]


class TestMatplotlib:
    def test_history(self):
        ax = plot_history({"d_loss": [0.5, 0.4], "g_loss": [0.9, 0.8], "seconds": [0.1, 0.1]})
        assert len(ax.lines) == 2

    def test_class_histograms(self):
        image = np.random.default_rng(0).integers(0, 256, (8, 8, 3), dtype=np.uint8)
        mask = np.random.default_rng(1).integers(0, 4, (8, 8), dtype=np.uint8)
        axes = plot_class_histograms(class_color_histograms(image, mask))
        assert [ax.get_title() for ax in axes] == ["background", "building", "road", "tree"]
