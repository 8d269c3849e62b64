"""The `colormapgan` command: train a segmenter, adapt, fine-tune, predict, evaluate.

Every configuration option also exists as a flag, e.g. `GAN_ITERATIONS` as
`--gan-iterations`; flags override values from `--config`, which override the
defaults and any `colormapgan.toml` found on import. All artifacts go to OUT_DIR.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import copy
import logging
from pathlib import Path
import sys
import tomllib

import numpy as np

from .adversary import GanTrainConfig, train_colormapgan
from .baselines import format_level_map, gray_world, histogram_match
from .checkpoint import load_checkpoint, restore, save_checkpoint
from .colormap import save_map, transform_image
from .config import cmapfig
from .dataset import DomainLoader, cut_patches, dataset_stats
from .discriminator import Discriminator
from .exceptions import (
    ColorRangeError,
    ConfigError,
    EmptyDatasetError,
    ImageFormatError,
    InputTooSmallError,
    InvalidConfigError,
    MaskFormatError,
    MissingArtifactError,
    PayloadError,
    ShapeMismatchError,
    StitchConflictError,
    UnsupervisedContractError,
)
from .format import format_audit, format_csv
from .metrics import iou_over_rasters, majority_vote, mean_iou_over_runs, reports_csv, reports_table
from .raster import colorize_mask, load_image, load_mask, save_image, save_mask
from .segmenter import SegNet, SegTrainConfig, finetune, predict, train_segmenter
from .synth import SynthConfig, write_dataset
from .tiling import TileGrid

logger = logging.getLogger(__name__)
audit = logging.getLogger("colormapgan.audit")

# Offsets added to the master seed, one per pipeline step
STEPS = {"synth": 0, "train": 1, "adapt": 2, "finetune": 3, "predict": 4}
# Option that --iters sets for each command
ITERATION_OPTIONS = {
    "train": "TRAIN_ITERATIONS",
    "adapt": "GAN_ITERATIONS",
    "finetune": "FINETUNE_ITERATIONS",
    "repeat": "FINETUNE_ITERATIONS",
}

SEGMENTER = "segmenter.ckpt"
FINETUNED = "finetuned.ckpt"
COLORMAP = "colormap.cmap"
DISCRIMINATOR = "discriminator.ckpt"
ADAPTATION = "adaptation.toml"
PREDICTION = "prediction.toml"

# Errors caused by the user's input or configuration, reported with exit code 2
INPUT_ERRORS = (
    ColorRangeError,
    ConfigError,
    EmptyDatasetError,
    ImageFormatError,
    InputTooSmallError,
    InvalidConfigError,
    MaskFormatError,
    MissingArtifactError,
    PayloadError,
    ShapeMismatchError,
    StitchConflictError,
    UnsupervisedContractError,
)


def seed_for(step: str, run: int = 0) -> int:
    return cmapfig.SEED + STEPS[step] + run


def option_flag(option: str) -> str:
    return "--" + option.lower().replace("_", "-")


def _element_type(default):
    while isinstance(default, list):
        default = default[0] if default else ""
    if isinstance(default, bool):
        return bool
    elif isinstance(default, int):
        return int
    elif isinstance(default, float):
        return float
    return str


def add_option_flags(parser: argparse.ArgumentParser):
    """Add one flag per configuration option; unset flags leave the option alone."""
    for option, details in cmapfig.options.items():
        default = details["default"]
        kwargs = {
            "dest": option,
            "default": argparse.SUPPRESS,
            "type": _element_type(default),
            "help": details["doc"].splitlines()[0],
        }
        if "choices" in details:
            kwargs["choices"] = details["choices"]
        if isinstance(default, list):
            kwargs["nargs"] = "+"
        flags = [option_flag(option)]
        if option == "OUT_DIR":
            flags.append("--out")
        parser.add_argument(*flags, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="TOML file of options to load")
    common.add_argument(
        "--iters", type=int, default=argparse.SUPPRESS, help="Iteration budget of the command's training step"
    )
    add_option_flags(common)

    parser = argparse.ArgumentParser(prog="colormapgan", description=__doc__.splitlines()[0], parents=[common])
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, command in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=command.__doc__.splitlines()[0])
    return parser


def apply_overrides(args: argparse.Namespace):
    for option, details in cmapfig.options.items():
        if option not in args:
            continue
        value = getattr(args, option)
        default = details["default"]
        if isinstance(default, list) and default and isinstance(default[0], list):
            # Tables are given flat on the command line
            width = len(default[0])
            if len(value) % width:
                raise InvalidConfigError(
                    f"{option_flag(option)} needs a multiple of {width} values, got {len(value)}", option
                )
            value = [value[i:i + width] for i in range(0, len(value), width)]
        setattr(cmapfig, option, value)
    if "iters" in args and args.command in ITERATION_OPTIONS:
        setattr(cmapfig, ITERATION_OPTIONS[args.command], args.iters)


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifactError(path)
    return path


def _load_segnet(path: Path) -> SegNet:
    net = SegNet()
    restore(net.parameters(), load_checkpoint(_require(path)))
    return net


def _training_pairs(images: list[np.ndarray], masks: list[np.ndarray]) -> list[tuple[np.ndarray, np.ndarray]]:
    size = cmapfig.TRAIN_PATCH_SIZE
    return list(zip(cut_patches(images, size), cut_patches(masks, size)))


def _write_history(path: Path, history: dict[str, list]):
    names = list(history)
    rows = [[i + 1, *(history[name][i] for name in names)] for i in range(len(history[names[0]]))]
    path.write_text(format_csv(["iteration", *names], rows), encoding="utf-8")


def _read_adaptation(out_dir: Path) -> dict:
    with open(_require(out_dir / ADAPTATION), "rb") as f:
        return tomllib.load(f)


def _prediction_inputs(loader: DomainLoader, out_dir: Path, adapted: bool = True) -> list[np.ndarray]:
    """Target images as prediction sees them.

    An adapted segmenter sees the gray-world corrected targets when adaptation made
    them; the initial segmenter always sees the raw targets.
    """
    if adapted and (out_dir / ADAPTATION).exists():
        record = _read_adaptation(out_dir)
        if record["targets"]:
            return [load_image(_require(out_dir / name)) for name in record["targets"]]
    return loader.load_target_images()


def _grid(image: np.ndarray) -> TileGrid:
    return TileGrid(image.shape[0], image.shape[1], cmapfig.PATCH_SIZE, cmapfig.OVERLAP)


def cmd_synth(out_dir: Path):
    """Generate a synthetic pair of domains with identical geometry."""
    cfg = SynthConfig(seed=seed_for("synth"))
    paths = write_dataset(out_dir, cfg)
    print(dataset_stats([load_mask(paths[1])]))
    audit.info(format_audit("synth", {"master_seed": cmapfig.SEED, "seed": cfg.seed}))


def cmd_train(out_dir: Path):
    """Train the initial segmenter on the labelled source domain."""
    seed = seed_for("train")
    pairs = DomainLoader().load_source()
    data = _training_pairs([image for image, _ in pairs], [mask for _, mask in pairs])
    net, history = train_segmenter(data, SegNet(seed=seed), SegTrainConfig(seed=seed))
    save_checkpoint(net.parameters(), out_dir / SEGMENTER)
    _write_history(out_dir / "train_history.csv", {"loss": history})
    audit.info(format_audit("train", {"master_seed": cmapfig.SEED, "seed": seed, "patches": len(data)}))


def cmd_adapt(out_dir: Path):
    """Recolour the source domain towards the target domain with the configured METHOD."""
    import tomli_w

    method = cmapfig.METHOD
    seed = seed_for("adapt")
    loader = DomainLoader()
    pairs = loader.load_source()
    sources = [image for image, _ in pairs]
    targets = []

    if method == "colormapgan":
        size = cmapfig.TRAIN_PATCH_SIZE
        cfg = GanTrainConfig(seed=seed)
        discriminator = Discriminator(cfg.discriminator_width, seed=seed)
        cmap, history = train_colormapgan(
            cut_patches(sources, size), cut_patches(loader.load_target_images(), size), cfg, discriminator
        )
        save_map(cmap, out_dir / COLORMAP)
        save_checkpoint(discriminator.parameters(), out_dir / DISCRIMINATOR)
        _write_history(out_dir / "gan_history.csv", history)
        fakes = [transform_image(cmap, image) for image in sources]
    elif method == "histmatch":
        level_map, fakes = histogram_match(sources, loader.load_target_images())
        (out_dir / "histmatch.csv").write_text(format_level_map(level_map), encoding="utf-8")
    elif method == "grayworld":
        rows = []
        fakes = []
        for domain, images in (("source", sources), ("target", loader.load_target_images())):
            for i, image in enumerate(images):
                corrected, gains = gray_world(image)
                rows.append([domain, i, *(f"{g:.6f}" for g in gains)])
                if domain == "source":
                    fakes.append(corrected)
                else:
                    targets.append(f"target_{i}.png")
                    save_image(corrected, out_dir / targets[-1])
        (out_dir / "grayworld.csv").write_text(format_csv(["domain", "raster", "r", "g", "b"], rows), encoding="utf-8")
    else:
        fakes = sources

    names = []
    for i, (fake, (_, mask)) in enumerate(zip(fakes, pairs)):
        names.append(f"fake_{i}.png")
        save_image(fake, out_dir / names[-1])
        save_image(colorize_mask(mask), out_dir / f"fake_{i}_mask.png")
    with open(out_dir / ADAPTATION, "wb") as f:
        tomli_w.dump({"method": method, "seed": seed, "fakes": names, "targets": targets}, f)
    audit.info(format_audit("adapt", {"method": method, "master_seed": cmapfig.SEED, "seed": seed}))


def _finetune_data(out_dir: Path, loader: DomainLoader) -> list[tuple[np.ndarray, np.ndarray]]:
    record = _read_adaptation(out_dir)
    masks = [mask for _, mask in loader.load_source()]
    fakes = [load_image(_require(out_dir / name)) for name in record["fakes"]]
    if len(fakes) != len(masks):
        raise ShapeMismatchError(f"{len(fakes)} recoloured rasters for {len(masks)} source masks")
    return _training_pairs(fakes, masks)


def cmd_finetune(out_dir: Path):
    """Fine-tune the initial segmenter on the recoloured source domain."""
    seed = seed_for("finetune")
    data = _finetune_data(out_dir, DomainLoader())
    net = _load_segnet(out_dir / SEGMENTER)
    tuned = finetune(net, data, SegTrainConfig(seed=seed, finetune=True))
    save_checkpoint(tuned.parameters(), out_dir / FINETUNED)
    audit.info(format_audit("finetune", {"master_seed": cmapfig.SEED, "seed": seed, "run": 0}))


def cmd_predict(out_dir: Path):
    """Segment the target-domain rasters."""
    import tomli_w

    adapted = cmapfig.PREDICT_FROM == "finetuned"
    checkpoint = FINETUNED if adapted else SEGMENTER
    net = _load_segnet(out_dir / checkpoint)
    images = _prediction_inputs(DomainLoader(), out_dir, adapted)
    method = "none"
    if adapted and (out_dir / ADAPTATION).exists():
        method = _read_adaptation(out_dir)["method"]
    for i, image in enumerate(images):
        mask = predict(net, image, _grid(image))
        save_mask(mask, out_dir / f"pred_{i}.png")
        save_image(colorize_mask(mask), out_dir / f"pred_{i}_color.png")
    with open(out_dir / PREDICTION, "wb") as f:
        tomli_w.dump({"checkpoint": checkpoint, "method": method}, f)
    audit.info(
        format_audit("predict", {"checkpoint": checkpoint, "master_seed": cmapfig.SEED, "seed": seed_for("predict")})
    )


def cmd_eval(out_dir: Path):
    """Compare the predicted masks with the target-domain ground truth."""
    loader = DomainLoader()
    if not loader.target_images:
        raise EmptyDatasetError("No target images configured (TARGET_IMAGES)")
    preds = [load_mask(out_dir / f"pred_{i}.png") for i in range(len(loader.target_images))]
    with loader.evaluation():
        gts = loader.load_target_masks()
    report = iou_over_rasters(preds, gts)
    method = cmapfig.METHOD
    if (out_dir / PREDICTION).exists():
        with open(out_dir / PREDICTION, "rb") as f:
            method = tomllib.load(f)["method"]
    text = report.to_text()
    (out_dir / "iou.txt").write_text(text + "\n", encoding="utf-8")
    (out_dir / "iou.csv").write_text(report.to_csv(method), encoding="utf-8")
    print(text)
    audit.info(format_audit("eval", {"method": method, "overall": f"{report.overall:.6f}"}))


def repeat_run(job: tuple) -> list[np.ndarray]:
    """Fine-tune and predict once; runs in a worker process when WORKERS > 1."""
    net, data, cfg, images, size, overlap = job
    tuned = finetune(net, data, cfg)
    return [predict(tuned, image, TileGrid(image.shape[0], image.shape[1], size, overlap)) for image in images]


def cmd_repeat(out_dir: Path):
    """Repeat fine-tuning and prediction RUNS times, then average and vote."""
    runs = cmapfig.RUNS
    if runs < 1:
        raise InvalidConfigError(f"RUNS must be at least 1, got {runs}", "RUNS")
    loader = DomainLoader()
    data = _finetune_data(out_dir, loader)
    net = _load_segnet(out_dir / SEGMENTER)
    images = _prediction_inputs(loader, out_dir)
    seeds = [seed_for("finetune", run) for run in range(runs)]
    jobs = [
        (net, data, SegTrainConfig(seed=seed, finetune=True), images, cmapfig.PATCH_SIZE, cmapfig.OVERLAP)
        for seed in seeds
    ]
    if cmapfig.WORKERS > 1:
        with ProcessPoolExecutor(max_workers=cmapfig.WORKERS) as pool:
            # map() yields in submission order
            results = list(pool.map(repeat_run, jobs))
    else:
        results = [repeat_run(job) for job in jobs]

    with loader.evaluation():
        gts = loader.load_target_masks()
    reports = [iou_over_rasters(preds, gts) for preds in results]
    mean = mean_iou_over_runs(reports)
    for j in range(len(images)):
        vote = majority_vote([preds[j] for preds in results])
        save_mask(vote, out_dir / f"vote_{j}.png")
        save_image(colorize_mask(vote), out_dir / f"vote_{j}_color.png")
    labels = [f"run {run}" for run in range(runs)] + ["mean"]
    text = reports_table([*reports, mean], labels)
    (out_dir / "repeat_iou.txt").write_text(text + "\n", encoding="utf-8")
    (out_dir / "repeat_iou.csv").write_text(reports_csv([*reports, mean], labels), encoding="utf-8")
    print(text)
    method = _read_adaptation(out_dir)["method"]
    audit.info(
        format_audit(
            "repeat", {"method": method, "master_seed": cmapfig.SEED, "seeds": ",".join(map(str, seeds))}
        )
    )


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "adapt": cmd_adapt,
    "finetune": cmd_finetune,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "repeat": cmd_repeat,
}


def _attach_audit(out_dir: Path) -> logging.Handler:
    handler = logging.FileHandler(out_dir / "audit.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(message)s"))
    audit.addHandler(handler)
    audit.setLevel(logging.INFO)
    return handler


def main(argv: list[str] | None = None) -> int:
    """Run one command; returns the exit code.

    0 on success, 2 for invalid input, configuration or missing artifacts, 1 otherwise.
    The configuration is restored afterwards.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit:
        return exit.code if isinstance(exit.code, int) else 2

    saved = {option: copy.deepcopy(details["current"]) for option, details in cmapfig.options.items()}
    try:
        if "config" in args:
            cmapfig.load_toml(["config"], _require(args.config))
        apply_overrides(args)
        logging.basicConfig(format="%(asctime)s %(name)s %(levelname)s %(message)s")
        logging.getLogger().setLevel(cmapfig.LOG_LEVEL)
        out_dir = Path(cmapfig.OUT_DIR)
        out_dir.mkdir(parents=True, exist_ok=True)
        handler = _attach_audit(out_dir)
        try:
            COMMANDS[args.command](out_dir)
        finally:
            audit.removeHandler(handler)
            handler.close()
    except INPUT_ERRORS as e:
        print(f"colormapgan {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.debug("Unhandled error", exc_info=True)
        print(f"colormapgan {args.command}: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    finally:
        for option, value in saved.items():
            cmapfig.options[option]["current"] = value
    return 0
