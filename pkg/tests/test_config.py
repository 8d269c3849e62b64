import pytest

from colormapgan import ConfigError, cmapfig


class TestOptions:
    def test_defaults(self):
        assert cmapfig.GAN_ITERATIONS == 8000
        assert cmapfig.GENERATOR_LR == 0.0005
        assert cmapfig.DISCRIMINATOR_LR == 0.0001
        assert cmapfig.GAN_BETAS == [0.5, 0.999]
        assert cmapfig.PATCH_SIZE == 256
        assert cmapfig.OVERLAP == 32
        assert cmapfig.METHOD == "colormapgan"

    def test_set_option(self):
        cmapfig.METHOD = "histmatch"
        assert cmapfig.METHOD == "histmatch"

    def test_choices_enforced(self):
        with pytest.raises(ConfigError):
            cmapfig.METHOD = "cyclegan"

    def test_number_expected(self):
        with pytest.raises(ConfigError):
            cmapfig.GAN_ITERATIONS = "many"
        with pytest.raises(ConfigError):
            cmapfig.GAN_ITERATIONS = True

    def test_list_expected(self):
        with pytest.raises(ConfigError):
            cmapfig.GAN_BETAS = 0.5

    def test_tuple_becomes_list(self):
        cmapfig.GAN_BETAS = (0.9, 0.99)
        assert cmapfig.GAN_BETAS == [0.9, 0.99]

    def test_reset(self):
        cmapfig.OVERLAP = 0
        cmapfig.reset()
        assert cmapfig.OVERLAP == 32

    def test_reset_does_not_share_lists(self):
        cmapfig.SOURCE_IMAGES.append("a.png")
        cmapfig.reset()
        assert cmapfig.SOURCE_IMAGES == []

    def test_print_options(self, capsys):
        cmapfig.print_options()
        printed = capsys.readouterr().out
        assert "[training]" in printed
        assert "GAN_ITERATIONS" in printed
        assert "Possible values: ['colormapgan', 'histmatch', 'grayworld', 'none']" in printed


class TestToml:
    def test_load_toml(self):
        cmapfig.load_toml(["config"], "tests/custom_config.toml")
        assert cmapfig.GAN_ITERATIONS == 2000
        assert cmapfig.GENERATOR_LR == 0.001
        assert cmapfig.PATCH_SIZE == 128
        assert cmapfig.METHOD == "histmatch"
        # Untouched options keep their defaults
        assert cmapfig.OVERLAP == 32

    def test_other_sections_ignored(self):
        cmapfig.load_toml(["synth"], "tests/custom_config.toml")
        assert cmapfig.GAN_ITERATIONS == 8000

    def test_unknown_option(self):
        with pytest.raises(ConfigError):
            cmapfig.load_toml(["config"], "tests/bad_config.toml")

    def test_find_toml(self, tmp_path):
        (tmp_path / "colormapgan.toml").write_text("[config.tiling]\nOVERLAP = 4\n")
        assert cmapfig.find_toml(tmp_path) == tmp_path / "colormapgan.toml"
        cmapfig.load_toml()
        assert cmapfig.OVERLAP == 4

    def test_save_config(self, tmp_path):
        cmapfig.BATCH_SIZE = 7
        cmapfig.METHOD = "grayworld"
        cmapfig.save_config(tmp_path / "saved.toml")
        cmapfig.reset()
        cmapfig.load_toml(["config"], tmp_path / "saved.toml")
        assert cmapfig.BATCH_SIZE == 7
        assert cmapfig.METHOD == "grayworld"
