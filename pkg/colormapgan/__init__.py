"""
Users are expected to import with `import colormapgan` or `from colormapgan import ...`;
the command-line interface is `colormapgan` (or `python -m colormapgan`).
"""

### SETUP ###
# Setup configuration first, as the typed configs read their defaults from it
from .config import cmapfig

cmapfig.find_toml()
cmapfig.load_toml(["config"])

# Import key modules in order of dependency
# While doing this make the most useful names available directly in this namespace
from .exceptions import *
from .tensor import Tensor, Parameter, constant
from .functional import conv2d, leaky_relu, instance_norm
from .optim import AdamState, Adam, adam_step
from .checkpoint import save_checkpoint, load_checkpoint, restore
from .colormap import (
    ColorMap,
    ColorMapOptimizer,
    apply,
    color_index,
    denormalize,
    load_map,
    normalize,
    save_map,
    touched_indices,
    transform_image,
)
from .discriminator import Discriminator, discriminate
from .adversary import GanTrainConfig, d_loss, g_loss, time_generator_update, train_colormapgan
from .baselines import gray_world, histogram_match
from .segmenter import SegNet, SegTrainConfig, augment, finetune, predict, seg_loss, train_segmenter
from .raster import colorize_mask, load_image, load_mask, save_image, save_mask
from .tiling import TileGrid, stitch_image, stitch_scores, tile
from .synth import SynthConfig, synth_generate, write_dataset
from .dataset import DomainLoader, dataset_stats
from .metrics import (
    IoUReport,
    class_color_histograms,
    histogram_distance,
    iou,
    majority_vote,
    mean_iou_over_runs,
)
