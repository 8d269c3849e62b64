from typing import Self

import numpy as np


class SparseTable:
    """Rows of float64 columns keyed by strictly increasing int64 keys.

    Each column has a fixed width and a default row; looking up an absent key yields
    the default, and defaults are never stored. Rows are only created by `upsert()`.
    """

    __slots__ = ("keys", "columns", "defaults")

    def __init__(self, defaults: dict[str, list[float]]):
        self.defaults = {name: np.asarray(row, dtype=np.float64) for name, row in defaults.items()}
        self.keys = np.empty(0, dtype=np.int64)
        self.columns = {
            name: np.empty((0, row.size), dtype=np.float64) for name, row in self.defaults.items()
        }

    def __len__(self) -> int:
        return self.keys.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseTable):
            return NotImplemented
        return (
            np.array_equal(self.keys, other.keys)
            and self.columns.keys() == other.columns.keys()
            and all(np.array_equal(self.columns[n], other.columns[n]) for n in self.columns)
        )

    def copy(self) -> Self:
        new = SparseTable({name: row for name, row in self.defaults.items()})
        new.keys = self.keys.copy()
        new.columns = {name: col.copy() for name, col in self.columns.items()}
        return new

    def locate(self, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return row positions of `keys` and a mask of which keys are present."""
        keys = np.asarray(keys, dtype=np.int64)
        positions = np.searchsorted(self.keys, keys)
        found = np.zeros(keys.shape, dtype=bool)
        inside = positions < self.keys.size
        found[inside] = self.keys[positions[inside]] == keys[inside]
        return positions, found

    def gather(self, name: str, keys: np.ndarray) -> np.ndarray:
        """Rows of column `name` for `keys`, with the default row for absent keys."""
        positions, found = self.locate(keys)
        out = np.tile(self.defaults[name], (np.size(keys), 1))
        out[found] = self.columns[name][positions[found]]
        return out

    def upsert(self, keys: np.ndarray, rows: dict[str, np.ndarray]) -> None:
        """Overwrite present keys and insert absent ones, keeping keys sorted.

        `keys` must be unique. Every column must be supplied.
        """
        keys = np.asarray(keys, dtype=np.int64)
        if keys.size == 0:
            return
        positions, found = self.locate(keys)
        for name, col in self.columns.items():
            col[positions[found]] = rows[name][found]
        new = ~found
        if not new.any():
            return
        merged = np.concatenate([self.keys, keys[new]])
        order = np.argsort(merged, kind="stable")
        self.keys = merged[order]
        for name in self.columns:
            self.columns[name] = np.concatenate([self.columns[name], rows[name][new]])[order]
