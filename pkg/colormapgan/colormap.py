"""The generator: a sparse, learned, per-colour affine transform of the 24-bit RGB cube.

Every 8-bit colour (r, g, b) has an index r·65536 + g·256 + b and, conceptually, a
scale vector w and a shift vector k acting on the normalised colour:

    out = clamp(in ∘ w + k, -1, 1)

Only colours that training has actually updated are stored; every other colour uses
w = (1, 1, 1), k = (0, 0, 0), so a fresh map is the identity.
"""

import logging
from pathlib import Path
import struct
from typing import BinaryIO, Iterator, Self

import numpy as np

from .exceptions import ColorRangeError, ImageFormatError, PayloadError, ShapeMismatchError
from .optim import adam_update
from .rounding import floor_to_uint8
from .sparse import SparseTable
from .tensor import Tensor

logger = logging.getLogger(__name__)

MAX_INDEX = 256**3 - 1

# Added before flooring in denormalize() so that integer levels survive the
# normalize/denormalize round trip despite binary rounding of v / 127.5
DENORMALIZE_GUARD = 1e-6

MAGIC = b"CMAP"
VERSION = 1
_HEADER = struct.Struct("<4sHI")
_ENTRY = np.dtype([("index", "<u4"), ("w", "<f4", (3,)), ("k", "<f4", (3,))])
_F32_MAX = float(np.finfo(np.float32).max)


def color_index(r: int, g: int, b: int) -> int:
    """Flatten an 8-bit (r, g, b) triple to its index in the colour cube."""
    for name, component in (("r", r), ("g", g), ("b", b)):
        if not 0 <= component <= 255 or int(component) != component:
            raise ColorRangeError(f"Colour component {name}={component} is not an 8-bit value")
    return int(r) * 65536 + int(g) * 256 + int(b)


def index_to_color(index: int) -> tuple[int, int, int]:
    if not 0 <= index <= MAX_INDEX:
        raise ColorRangeError(f"Colour index {index} outside [0, {MAX_INDEX}]")
    return index >> 16, (index >> 8) & 255, index & 255


def _check_image(image: np.ndarray):
    if image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] != 3:
        raise ImageFormatError(
            f"Expected an 8-bit RGB array of shape (H, W, 3), got {image.dtype} {image.shape}"
        )


def color_indices(image: np.ndarray) -> np.ndarray:
    """Per-pixel colour index of an 8-bit RGB image, shape (H, W)."""
    _check_image(image)
    rgb = image.astype(np.int64)
    return (rgb[..., 0] << 16) | (rgb[..., 1] << 8) | rgb[..., 2]


def touched_indices(image: np.ndarray) -> np.ndarray:
    """Sorted, duplicate-free indices of the colours present in `image`."""
    return np.unique(color_indices(image))


def normalize(image: np.ndarray) -> np.ndarray:
    """Map 8-bit levels to [-1, 1] by v / 127.5 - 1."""
    return np.asarray(image, dtype=np.float64) / 127.5 - 1.0


def denormalize(patch: np.ndarray) -> np.ndarray:
    """Map normalised values back to 8-bit levels by floor((v + 1) · 127.5)."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.size and (patch.min() < -1.0 or patch.max() > 1.0):
        raise ColorRangeError(
            f"denormalize() needs values in [-1, 1], got [{patch.min()}, {patch.max()}]"
        )
    return floor_to_uint8((patch + 1.0) * 127.5, DENORMALIZE_GUARD)


class ColorMap:
    """Sparse map from colour index to a (w, k) pair of 3-vectors.

    Absent indices denote the identity entry. Stored entries are rounded to float32, the
    precision of the colour-map file, so a saved map loads back equal. Gradients produced by `apply()` are
    collected here until an optimizer consumes them with `pop_gradients()`.
    """

    __slots__ = ("_table", "_pending")

    def __init__(self):
        self._table = SparseTable({"w": [1.0, 1.0, 1.0], "k": [0.0, 0.0, 0.0]})
        self._pending = []

    @classmethod
    def from_entries(cls, entries: dict[int, tuple]) -> Self:
        """Build a map from `{index: (w, k)}`."""
        cmap = cls()
        if entries:
            indices = np.array(sorted(entries), dtype=np.int64)
            w = np.array([entries[i][0] for i in indices], dtype=np.float64).reshape(-1, 3)
            k = np.array([entries[i][1] for i in indices], dtype=np.float64).reshape(-1, 3)
            cmap.set_entries(indices, w, k)
        return cmap

    def __len__(self) -> int:
        return len(self._table)

    def __repr__(self):
        return f"ColorMap({len(self)} entries)"

    def __eq__(self, other) -> bool:
        if not isinstance(other, ColorMap):
            return NotImplemented
        return self._table == other._table

    def copy(self) -> Self:
        new = ColorMap()
        new._table = self._table.copy()
        return new

    @property
    def indices(self) -> np.ndarray:
        return self._table.keys.copy()

    @property
    def scales(self) -> np.ndarray:
        return self._table.columns["w"].copy()

    @property
    def shifts(self) -> np.ndarray:
        return self._table.columns["k"].copy()

    def entries(self) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
        for index, w, k in zip(self._table.keys, self._table.columns["w"], self._table.columns["k"]):
            yield int(index), w.copy(), k.copy()

    def contains(self, indices: np.ndarray) -> np.ndarray:
        """Boolean mask of which indices have a stored entry."""
        return self._table.locate(indices)[1]

    def lookup(self, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(w, k) rows for `indices`, identity rows where no entry exists."""
        return self._table.gather("w", indices), self._table.gather("k", indices)

    def set_entries(self, indices: np.ndarray, w: np.ndarray, k: np.ndarray) -> None:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() > MAX_INDEX):
            raise ColorRangeError(f"Colour indices must lie in [0, {MAX_INDEX}]")
        if np.unique(indices).size != indices.size:
            raise ValueError("set_entries() needs unique indices")
        w = np.asarray(w, dtype=np.float64).reshape(-1, 3)
        k = np.asarray(k, dtype=np.float64).reshape(-1, 3)
        if np.abs(w).max(initial=0.0) > _F32_MAX or np.abs(k).max(initial=0.0) > _F32_MAX:
            raise FloatingPointError("Colour map entries exceed float32 range")
        w = w.astype(np.float32).astype(np.float64)
        k = k.astype(np.float32).astype(np.float64)
        if not (np.isfinite(w).all() and np.isfinite(k).all()):
            raise FloatingPointError("Colour map entries must be finite")
        self._table.upsert(indices, {"w": w, "k": k})

    def accumulate_gradients(self, indices: np.ndarray, grad_w: np.ndarray, grad_k: np.ndarray) -> None:
        self._pending.append((indices, grad_w, grad_k))

    def pop_gradients(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sum and clear all pending gradients; returns (indices, grad_w, grad_k)."""
        if not self._pending:
            return np.empty(0, dtype=np.int64), np.empty((0, 3)), np.empty((0, 3))
        indices = np.concatenate([p[0] for p in self._pending])
        keys, inverse = np.unique(indices, return_inverse=True)
        grad_w = np.zeros((keys.size, 3))
        grad_k = np.zeros((keys.size, 3))
        np.add.at(grad_w, inverse, np.concatenate([p[1] for p in self._pending]))
        np.add.at(grad_k, inverse, np.concatenate([p[2] for p in self._pending]))
        self._pending = []
        return keys, grad_w, grad_k


def _affine(cmap: ColorMap, index_of: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate the map once per distinct colour index.

    Returns the distinct indices, the pixel-to-colour inverse, the normalised colours
    and their unclamped transforms.
    """
    keys, inverse = np.unique(index_of.ravel(), return_inverse=True)
    colors = np.stack([keys >> 16, (keys >> 8) & 255, keys & 255], axis=1)
    x = normalize(colors)
    w, k = cmap.lookup(keys)
    return keys, inverse.ravel(), x, x * w + k


def apply(cmap: ColorMap, image: np.ndarray, index_of: np.ndarray | None = None) -> Tensor:
    """Recolour an 8-bit patch, returning the clamped normalised result as a graph node.

    `index_of` may be passed when the colour indices are already known; it must
    derive from `image` itself. The returned tensor has shape (H, W, 3). Its backward
    pass pushes gradients into `cmap` for the colours of this patch only; elements
    clamped to ±1 or beyond receive zero gradient.
    """
    _check_image(image)
    if index_of is not None and index_of.shape != image.shape[:2]:
        raise ShapeMismatchError(f"index_of {index_of.shape} does not match image {image.shape}")
    if index_of is None:
        index_of = color_indices(image)
    keys, inverse, x, raw = _affine(cmap, index_of)
    inside = (raw > -1.0) & (raw < 1.0)
    out = np.clip(raw, -1.0, 1.0)[inverse].reshape(image.shape)

    def backward(g):
        g = g.reshape(-1, 3)
        per_color = np.stack(
            [np.bincount(inverse, weights=g[:, c], minlength=keys.size) for c in range(3)], axis=1
        ) * inside
        cmap.accumulate_gradients(keys, per_color * x, per_color)
        return ()

    return Tensor(out, requires_grad=True, _backward=backward, _op="colormap.apply")


def transform_image(cmap: ColorMap, image: np.ndarray) -> np.ndarray:
    """Recolour a whole 8-bit image of any size.

    The result for a pixel depends only on that pixel's colour, so transforming tiles
    separately and stitching them gives exactly the whole-image result.
    """
    _, inverse, _, raw = _affine(cmap, color_indices(image))
    recoloured = denormalize(np.clip(raw, -1.0, 1.0))
    return recoloured[inverse].reshape(image.shape)


class ColorMapOptimizer:
    """Lazy Adam over colour-map entries.

    Each entry keeps its own moments and step counter, and only entries whose colours
    received a gradient are updated. Entries are materialised in the map the first
    time an update moves them away from the identity.
    """

    def __init__(self, cmap: ColorMap, lr: float, betas: tuple[float, float] = (0.5, 0.999)):
        if lr <= 0:
            raise ValueError(f"Learning rate must be positive, got {lr}")
        self.cmap = cmap
        self.lr = lr
        self.betas = tuple(betas)
        zeros = [0.0, 0.0, 0.0]
        self._moments = SparseTable({"m_w": zeros, "v_w": zeros, "m_k": zeros, "v_k": zeros, "t": [0.0]})

    def step(self) -> int:
        """Consume the pending gradients of the map; returns the number of colours updated."""
        keys, grad_w, grad_k = self.cmap.pop_gradients()
        if keys.size == 0:
            return 0
        w, k = self.cmap.lookup(keys)
        moments = {name: self._moments.gather(name, keys) for name in self._moments.columns}
        moments["t"] += 1
        beta1, beta2 = self.betas
        adam_update(w, grad_w, moments["m_w"], moments["v_w"], moments["t"], self.lr, beta1, beta2)
        adam_update(k, grad_k, moments["m_k"], moments["v_k"], moments["t"], self.lr, beta1, beta2)

        present = self.cmap.contains(keys)
        moved = (w != 1.0).any(axis=1) | (k != 0.0).any(axis=1)
        keep = present | moved
        self.cmap.set_entries(keys[keep], w[keep], k[keep])
        self._moments.upsert(keys[keep], {name: col[keep] for name, col in moments.items()})
        logger.debug("Updated %d of %d touched colours", keep.sum(), keys.size)
        return int(keep.sum())


def save_map(cmap: ColorMap, sink: BinaryIO | Path | str) -> None:
    """Write a colour map: "CMAP", u16 version, u32 count, then sorted entries.

    Each entry is a u32 index followed by six float32 values w_r, w_g, w_b, k_r, k_g,
    k_b, all little-endian.
    """
    entries = np.empty(len(cmap), dtype=_ENTRY)
    entries["index"] = cmap.indices
    entries["w"] = cmap.scales
    entries["k"] = cmap.shifts
    payload = _HEADER.pack(MAGIC, VERSION, len(cmap)) + entries.tobytes()
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(payload)
    else:
        sink.write(payload)


def load_map(source: BinaryIO | Path | str) -> ColorMap:
    if isinstance(source, (str, Path)):
        raw = Path(source).read_bytes()
    else:
        raw = source.read()
    if len(raw) < _HEADER.size:
        raise PayloadError(f"Colour map header truncated, {len(raw)} of {_HEADER.size} bytes", len(raw))
    magic, version, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise PayloadError(f"Bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise PayloadError(f"Unsupported colour map version {version}", 4)
    expected = _HEADER.size + count * _ENTRY.itemsize
    if len(raw) < expected:
        complete = (len(raw) - _HEADER.size) // _ENTRY.itemsize
        raise PayloadError(
            f"Colour map truncated: {count} entries declared, {complete} complete",
            _HEADER.size + complete * _ENTRY.itemsize,
        )
    if len(raw) > expected:
        raise PayloadError(f"{len(raw) - expected} trailing bytes after {count} entries", expected)
    entries = np.frombuffer(raw, dtype=_ENTRY, count=count, offset=_HEADER.size)
    indices = entries["index"].astype(np.int64)
    unordered = np.nonzero(np.diff(indices) <= 0)[0]
    if unordered.size:
        i = int(unordered[0]) + 1
        position = _HEADER.size + i * _ENTRY.itemsize
        if indices[i] == indices[i - 1]:
            raise PayloadError(f"Duplicate colour index {indices[i]}", position)
        raise PayloadError(f"Colour index {indices[i]} out of ascending order", position)
    if indices.size and indices.max() > MAX_INDEX:
        raise PayloadError(f"Colour index {indices.max()} outside the 24-bit cube", _HEADER.size)
    cmap = ColorMap()
    cmap.set_entries(indices, entries["w"].astype(np.float64), entries["k"].astype(np.float64))
    return cmap
