import numpy as np
import pytest
import tomli_w

from colormapgan import cmapfig, load_map, load_mask, save_mask
from colormapgan.cli import build_parser, main, option_flag, seed_for

TINY = {
    "training": {
        "GAN_ITERATIONS": 2,
        "TRAIN_ITERATIONS": 2,
        "FINETUNE_ITERATIONS": 2,
        "BATCH_SIZE": 2,
        "SEG_DEPTH": 2,
        "SEG_WIDTH": 4,
        "DISCRIMINATOR_WIDTH": 2,
        "TRAIN_PATCH_SIZE": 32,
        "LOG_EVERY": 1,
    },
    "tiling": {"PATCH_SIZE": 32, "OVERLAP": 8},
    "synth": {"SCENE_SIZE": 64, "BUILDINGS": 4, "ROADS": 1, "TREES": 6},
    "pipeline": {"RUNS": 2},
}


@pytest.fixture
def workspace(tmp_path):
    """A tiny configuration file pointing at a synthetic pair under `tmp_path`."""
    data = tmp_path / "data"
    table = {section: dict(options) for section, options in TINY.items()}
    table["paths"] = {
        "SOURCE_IMAGES": [str(data / "imageA.png")],
        "SOURCE_MASKS": [str(data / "maskA.png")],
        "TARGET_IMAGES": [str(data / "imageB.png")],
        "TARGET_MASKS": [str(data / "maskB.png")],
        "OUT_DIR": str(tmp_path / "out"),
    }
    config = tmp_path / "tiny.toml"
    with open(config, "wb") as f:
        tomli_w.dump({"config": table}, f)
    assert main(["synth", "--config", str(config), "--out", str(data)]) == 0
    return tmp_path, config


def run(config, *args):
    return main([args[0], "--config", str(config), *args[1:]])


class TestParser:
    def test_flag_names(self):
        assert option_flag("GAN_ITERATIONS") == "--gan-iterations"

    def test_flags_override(self):
        args = build_parser().parse_args(["adapt", "--method", "histmatch", "--gan-betas", "0.4", "0.9"])
        assert args.command == "adapt"
        assert args.METHOD == "histmatch"
        assert args.GAN_BETAS == [0.4, 0.9]
        assert "GAN_ITERATIONS" not in args

    def test_bad_choice(self, capsys):
        assert main(["adapt", "--method", "cyclegan"]) == 2

    def test_help(self, capsys):
        assert main(["--help"]) == 0
        assert "synth" in capsys.readouterr().out

    def test_seeds(self):
        cmapfig.SEED = 10
        assert [seed_for(step) for step in ("synth", "train", "adapt", "finetune", "predict")] == [10, 11, 12, 13, 14]
        assert seed_for("finetune", 3) == 16

    def test_config_restored(self, tmp_path):
        main(["synth", "--scene-size", "32", "--out", str(tmp_path)])
        assert cmapfig.SCENE_SIZE == 512


class TestSynth:
    def test_writes_dataset(self, workspace, capsys):
        tmp_path, _ = workspace
        names = sorted(p.name for p in (tmp_path / "data").iterdir())
        assert names == ["audit.log", "imageA.png", "imageB.png", "manifest.toml", "maskA.png", "maskB.png"]
        assert load_mask(tmp_path / "data" / "maskA.png").shape == (64, 64)

    def test_zero_size_scene(self, tmp_path, capsys):
        assert main(["synth", "--scene-size", "0", "--out", str(tmp_path)]) == 2
        assert "scene_size" in capsys.readouterr().err

    def test_palette_given_flat(self, tmp_path):
        palette = ["90", "110", "80", "170", "90", "70", "130", "130", "130", "60", "100", "50"]
        assert main(["synth", "--scene-size", "32", "--palette-a", *palette, "--out", str(tmp_path)]) == 0
        assert main(["synth", "--palette-a", *palette[:5], "--out", str(tmp_path)]) == 2


class TestPipeline:
    def test_missing_segmenter(self, workspace, capsys):
        _, config = workspace
        assert run(config, "adapt", "--method", "none") == 0
        assert run(config, "finetune") == 2
        assert "Missing prerequisite artifact" in capsys.readouterr().err

    def test_missing_config(self, tmp_path, capsys):
        assert main(["train", "--config", str(tmp_path / "absent.toml")]) == 2

    def test_full_pipeline(self, workspace, capsys):
        tmp_path, config = workspace
        out = tmp_path / "out"
        for command in ("train", "adapt", "finetune", "predict", "eval"):
            assert run(config, command) == 0, command
        for name in (
            "segmenter.ckpt", "segmenter.bin", "train_history.csv", "colormap.cmap",
            "discriminator.ckpt", "gan_history.csv", "adaptation.toml", "fake_0.png",
            "fake_0_mask.png", "finetuned.ckpt", "pred_0.png", "pred_0_color.png",
            "prediction.toml", "iou.txt", "iou.csv",
        ):
            assert (out / name).exists(), name
        assert "Overall" in capsys.readouterr().out
        audit = (out / "audit.log").read_text()
        assert "adapt method=colormapgan master_seed=0 seed=2" in audit
        assert "train master_seed=0 seed=1" in audit
        assert len((out / "train_history.csv").read_text().splitlines()) == 3

    def test_adapt_deterministic(self, workspace):
        tmp_path, config = workspace
        out = tmp_path / "out"
        assert run(config, "adapt") == 0
        first = (out / "colormap.cmap").read_bytes()
        assert run(config, "adapt") == 0
        assert (out / "colormap.cmap").read_bytes() == first
        assert len(load_map(out / "colormap.cmap")) > 0

    @pytest.mark.parametrize("method", ["histmatch", "grayworld", "none"])
    def test_baseline_methods(self, workspace, method):
        tmp_path, config = workspace
        for command in ("train", "adapt", "finetune", "predict", "eval"):
            assert run(config, command, "--method", method) == 0, command
        out = tmp_path / "out"
        assert (out / "iou.csv").read_text().splitlines()[1].startswith(method)
        assert ((out / "target_0.png").exists()) == (method == "grayworld")

    def test_predict_from_initial(self, workspace):
        tmp_path, config = workspace
        assert run(config, "train") == 0
        assert run(config, "predict", "--predict-from", "initial") == 0
        assert (tmp_path / "out" / "pred_0.png").exists()

    def test_eval_labels_with_adapted_method(self, workspace):
        tmp_path, config = workspace
        assert run(config, "train") == 0
        assert run(config, "adapt", "--method", "histmatch") == 0
        for command in ("finetune", "predict", "eval"):
            assert run(config, command) == 0, command
        assert (tmp_path / "out" / "iou.csv").read_text().splitlines()[1].startswith("histmatch,")

    def test_initial_segmenter_sees_raw_targets(self, workspace):
        tmp_path, config = workspace
        out = tmp_path / "out"
        assert run(config, "train") == 0
        assert run(config, "predict", "--predict-from", "initial") == 0
        raw = (out / "pred_0.png").read_bytes()
        assert run(config, "adapt", "--method", "grayworld") == 0
        assert run(config, "predict", "--predict-from", "initial") == 0
        assert (out / "pred_0.png").read_bytes() == raw
        assert run(config, "eval", "--method", "grayworld") == 0
        assert (out / "iou.csv").read_text().splitlines()[1].startswith("none,")

    def test_eval_perfect(self, workspace, capsys):
        tmp_path, config = workspace
        out = tmp_path / "out"
        out.mkdir()
        save_mask(load_mask(tmp_path / "data" / "maskB.png"), out / "pred_0.png")
        assert run(config, "eval") == 0
        assert "100.00" in (out / "iou.txt").read_text()
        assert (out / "iou.csv").read_text().splitlines()[1].endswith("1.000000")

    def test_repeat(self, workspace, capsys):
        tmp_path, config = workspace
        out = tmp_path / "out"
        for command in ("train", "adapt"):
            assert run(config, command, "--method", "none") == 0
        assert run(config, "repeat", "--method", "none") == 0
        lines = (out / "repeat_iou.csv").read_text().splitlines()
        assert [line.split(",")[0] for line in lines] == ["label", "run 0", "run 1", "mean"]
        assert load_mask(out / "vote_0.png").shape == (64, 64)
        assert "seeds=3,4" in (out / "audit.log").read_text()

    def test_repeat_single_run(self, workspace):
        tmp_path, config = workspace
        out = tmp_path / "out"
        for command in ("train", "adapt"):
            assert run(config, command, "--method", "none") == 0
        assert run(config, "repeat", "--method", "none", "--runs", "1") == 0
        first = load_mask(out / "vote_0.png")
        rows = [line.split(",") for line in (out / "repeat_iou.csv").read_text().splitlines()]
        assert rows[1][1:] == rows[2][1:]
        assert run(config, "repeat", "--method", "none", "--runs", "1") == 0
        assert np.array_equal(load_mask(out / "vote_0.png"), first)

    def test_repeat_worker_pool_matches_sequential(self, workspace):
        tmp_path, config = workspace
        out = tmp_path / "out"
        for command in ("train", "adapt"):
            assert run(config, command, "--method", "none") == 0
        assert run(config, "repeat", "--method", "none", "--workers", "1") == 0
        sequential = [(out / name).read_bytes() for name in ("repeat_iou.csv", "vote_0.png")]
        assert run(config, "repeat", "--method", "none", "--workers", "2") == 0
        assert [(out / name).read_bytes() for name in ("repeat_iou.csv", "vote_0.png")] == sequential

    def test_repeat_needs_runs(self, workspace, capsys):
        _, config = workspace
        assert run(config, "repeat", "--runs", "0") == 2
