import numpy as np
import pytest

from colormapgan import (
    ColorMap,
    Discriminator,
    EmptyDatasetError,
    GanTrainConfig,
    InputTooSmallError,
    InvalidConfigError,
    Parameter,
    SynthConfig,
    cmapfig,
    d_loss,
    g_loss,
    load_map,
    save_map,
    synth_generate,
    tile,
    time_generator_update,
    touched_indices,
    train_colormapgan,
    transform_image,
)

from gradcheck import numeric_grad, relative_error


def tiny_config(**overrides):
    fields = {"iterations": 3, "discriminator_width": 2, "seed": 0}
    fields.update(overrides)
    return GanTrainConfig(**fields)


def patches(seed, n=3, size=24):
    rng = np.random.default_rng(seed)
    return [rng.integers(0, 256, (size, size, 3), dtype=np.uint8) for _ in range(n)]


class TestLosses:
    def test_d_loss(self):
        assert float(d_loss([1.0], [0.0])) == 0.0
        assert float(d_loss([0.0], [1.0])) == 2.0
        assert float(d_loss([0.5], [0.5])) == 0.5

    def test_g_loss(self):
        assert float(g_loss([1.0])) == 0.0
        assert float(g_loss([0.0])) == 1.0
        assert float(g_loss([0.5])) == 0.25

    def test_averages_over_scores(self):
        assert float(g_loss([0.0, 1.0])) == 0.5

    def test_score_map_reduced_by_mean(self):
        s = Parameter([[0.0, 0.5], [1.0, 2.0]], "s")
        loss = g_loss([s])
        loss.backward()
        assert float(loss) == pytest.approx((1 + 0.25 + 0 + 1) / 4)
        assert np.allclose(s.grad, 2 * (s.data - 1) / 4)

    def test_mixed_score_map_sizes(self):
        single = Parameter([[0.0]], "single")
        grid = Parameter([[1.0, 1.0], [0.0, 0.0]], "grid")
        assert float(g_loss([single, grid])) == pytest.approx((1.0 + 0.5) / 2)
        assert float(d_loss([grid], [single])) == pytest.approx(0.5)

    def test_d_loss_gradient(self):
        rng = np.random.default_rng(0)
        real = Parameter(rng.normal(size=(3, 3)), "real")
        fake = Parameter(rng.normal(size=(3, 3)), "fake")
        d_loss([real], [fake]).backward()

        def f():
            return float(d_loss([real], [fake]))

        assert relative_error(real.grad, numeric_grad(f, real.data)) < 1e-6
        assert relative_error(fake.grad, numeric_grad(f, fake.data)) < 1e-6

    def test_empty(self):
        with pytest.raises(ValueError):
            g_loss([])


class TestGanTrainConfig:
    def test_defaults(self):
        cfg = GanTrainConfig()
        assert cfg.generator_lr == 0.0005
        assert cfg.discriminator_lr == 0.0001
        assert cfg.betas == (0.5, 0.999)
        assert cfg.iterations == 8000

    def test_follows_config(self):
        cmapfig.GAN_ITERATIONS = 5
        assert GanTrainConfig().iterations == 5

    def test_invalid(self):
        with pytest.raises(InvalidConfigError) as excinfo:
            GanTrainConfig(generator_lr=-1.0)
        assert excinfo.value.field == "generator_lr"
        with pytest.raises(InvalidConfigError):
            GanTrainConfig(iterations=-1)
        with pytest.raises(InvalidConfigError):
            GanTrainConfig(betas=(1.0, 0.5))


class TestTraining:
    def test_zero_iterations(self):
        cmap, history = train_colormapgan(patches(0), patches(1), tiny_config(iterations=0))
        assert cmap == ColorMap()
        assert history == {"d_loss": [], "g_loss": [], "seconds": []}

    def test_empty_source(self):
        with pytest.raises(EmptyDatasetError):
            train_colormapgan([], patches(1), tiny_config())

    def test_small_patches(self):
        with pytest.raises(InputTooSmallError):
            train_colormapgan(patches(0, size=16), patches(1), tiny_config())

    def test_history(self):
        _, history = train_colormapgan(patches(0), patches(1), tiny_config())
        assert all(len(values) == 3 for values in history.values())
        assert all(value >= 0 for value in history["d_loss"] + history["g_loss"])

    def test_deterministic(self):
        cmap_a, history_a = train_colormapgan(patches(0), patches(1), tiny_config())
        cmap_b, history_b = train_colormapgan(patches(0), patches(1), tiny_config())
        assert cmap_a == cmap_b
        assert history_a["d_loss"] == history_b["d_loss"]
        assert history_a["g_loss"] == history_b["g_loss"]

    def test_entries_only_for_source_colors(self):
        source = patches(0)
        cmap, _ = train_colormapgan(source, patches(1), tiny_config())
        seen = set()
        for patch in source:
            seen.update(touched_indices(patch).tolist())
        assert len(cmap) > 0
        assert set(cmap.indices.tolist()) <= seen

    def test_trained_map_survives_save_and_load(self, tmp_path):
        cmap, _ = train_colormapgan(patches(0), patches(1), tiny_config())
        assert len(cmap) > 0
        save_map(cmap, tmp_path / "trained.cmap")
        loaded = load_map(tmp_path / "trained.cmap")
        assert loaded == cmap
        image = patches(0)[0]
        assert np.array_equal(transform_image(loaded, image), transform_image(cmap, image))

    def test_discriminator_trained_in_place(self):
        d = Discriminator(width=2)
        before = [p.data.copy() for p in d.parameters()]
        train_colormapgan(patches(0), patches(1), tiny_config(), discriminator=d)
        assert any(not np.array_equal(b, p.data) for b, p in zip(before, d.parameters()))

    def test_equal_domains_stay_close(self):
        cfg = SynthConfig(scene_size=96, scale_b=[1.0, 1.0, 1.0], offset_b=[0.0, 0.0, 0.0])
        (image_a, _), (image_b, _) = synth_generate(cfg)
        _, source = tile(image_a[:, :64], 32, 0)
        _, target = tile(image_b[:, :64], 32, 0)
        cmap, _ = train_colormapgan(source, target, tiny_config(iterations=10))
        _, held_out = tile(image_a[:, 64:], 32, 0)
        for patch in held_out:
            deviation = np.abs(transform_image(cmap, patch).astype(int) - patch.astype(int))
            assert deviation.mean(axis=(0, 1)).max() <= 2


class TestTiming:
    def test_generator_update(self):
        image = patches(0, n=1, size=64)[0]
        cmap = ColorMap()
        seconds = time_generator_update(cmap, image, repeats=3)
        assert seconds > 0
        assert len(cmap) == 0
