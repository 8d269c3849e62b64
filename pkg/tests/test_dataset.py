import numpy as np
import pytest

from colormapgan import (
    DomainLoader,
    EmptyDatasetError,
    ShapeMismatchError,
    UnsupervisedContractError,
    cmapfig,
    dataset_stats,
    save_image,
    save_mask,
)
from colormapgan.dataset import cut_patches
from colormapgan.raster import BUILDING, ROAD


@pytest.fixture
def domain(tmp_path):
    rng = np.random.default_rng(0)
    paths = {}
    for name in ("source", "target"):
        image_path, mask_path = tmp_path / f"{name}.png", tmp_path / f"{name}_mask.png"
        save_image(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8), image_path)
        save_mask(rng.integers(0, 4, (32, 32), dtype=np.uint8), mask_path)
        paths[name] = (str(image_path), str(mask_path))
    return paths


class TestStats:
    def test_all_background(self):
        stats = dataset_stats([np.zeros((10, 10), dtype=np.uint8)] * 2)
        assert stats.frequencies["building"] == 0.0
        assert stats.frequencies["road"] == 0.0
        assert stats.frequencies["tree"] == 0.0
        assert stats.frequencies["background"] == 100.0

    def test_half_and_half(self):
        mask = np.array([[BUILDING, BUILDING], [ROAD, ROAD]], dtype=np.uint8)
        stats = dataset_stats([mask])
        assert stats.frequencies == {"background": 0.0, "building": 50.0, "road": 50.0, "tree": 0.0}

    def test_sums_to_hundred(self):
        masks = [np.random.default_rng(n).integers(0, 4, (37, 41), dtype=np.uint8) for n in range(3)]
        assert sum(dataset_stats(masks).frequencies.values()) == pytest.approx(100.0)

    def test_patches_and_area(self):
        stats = dataset_stats([np.zeros((512, 512), dtype=np.uint8), np.zeros((10, 10), dtype=np.uint8)])
        assert stats.patches == 9 + 1
        assert stats.area_km2 == pytest.approx((512 * 512 + 100) / 1e6)

    def test_pixel_size(self):
        stats = dataset_stats([np.zeros((100, 100), dtype=np.uint8)], pixel_size=0.5)
        assert stats.area_km2 == pytest.approx(0.0025)

    def test_table(self):
        text = str(dataset_stats([np.array([[BUILDING, ROAD]], dtype=np.uint8)]))
        assert "building" in text and "50.00" in text
        assert "patches: 1" in text

    def test_empty(self):
        with pytest.raises(EmptyDatasetError):
            dataset_stats([])


class TestPatches:
    def test_cut(self):
        patches = cut_patches([np.zeros((64, 96), dtype=np.uint8), np.zeros((40, 40), dtype=np.uint8)], 32)
        assert len(patches) == 6 + 4
        assert all(p.shape == (32, 32) for p in patches)


class TestDomainLoader:
    def test_paths_from_config(self, domain):
        cmapfig.SOURCE_IMAGES = [domain["source"][0]]
        cmapfig.SOURCE_MASKS = [domain["source"][1]]
        ((image, mask),) = DomainLoader().load_source()
        assert image.shape == (32, 32, 3)
        assert mask.shape == (32, 32)

    def test_target_masks_need_evaluation(self, domain):
        loader = DomainLoader(target_images=[domain["target"][0]], target_masks=[domain["target"][1]])
        assert len(loader.load_target_images()) == 1
        with pytest.raises(UnsupervisedContractError):
            loader.load_target_masks()
        with loader.evaluation():
            assert loader.load_target_masks()[0].shape == (32, 32)
        with pytest.raises(UnsupervisedContractError):
            loader.load_target_masks()

    def test_unpaired_source(self, domain):
        loader = DomainLoader(source_images=[domain["source"][0]], source_masks=[])
        with pytest.raises(ShapeMismatchError):
            loader.load_source()

    def test_empty_source(self):
        with pytest.raises(EmptyDatasetError):
            DomainLoader().load_source()
