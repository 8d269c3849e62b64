"""Checkpoint payloads for parameter sets.

A checkpoint is a pair of files: a plain-text manifest and a binary data file. The
manifest looks like:

```
colormapgan-checkpoint 1
data segmenter.bin
enc0.weight 16 3 3 3
enc0.bias 16
...
```

and the data file holds each parameter as little-endian float32 values, row-major,
in manifest order. Values are down-converted to float32 on save and up-converted to
float64 on load.
"""

from pathlib import Path

import numpy as np

from .exceptions import MissingArtifactError, PayloadError, ShapeMismatchError
from .tensor import Parameter

MAGIC = "colormapgan-checkpoint"
VERSION = 1


def save_checkpoint(params: list[Parameter], path: Path | str) -> Path:
    """Write the manifest to `path` and the values next to it with suffix `.bin`.

    Returns the path of the data file.
    """
    path = Path(path)
    data_path = path.with_suffix(".bin")
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise ValueError("Checkpoint parameters need unique names")
    lines = [f"{MAGIC} {VERSION}", f"data {data_path.name}"]
    for param in params:
        lines.append(" ".join([param.name, *(str(extent) for extent in param.shape)]))
    with open(data_path, "wb") as f:
        for param in params:
            f.write(param.data.astype("<f4").tobytes())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return data_path


def load_checkpoint(path: Path | str) -> dict[str, np.ndarray]:
    """Read a checkpoint back into an ordered mapping of name to float64 array."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"{MAGIC} {VERSION}":
        raise PayloadError(f"{path} is not a version {VERSION} checkpoint manifest", 0)
    if len(lines) < 2 or not lines[1].startswith("data "):
        raise PayloadError(f"{path} does not name its data file", 1)
    data_path = path.with_name(lines[1][5:].strip())
    if not data_path.exists():
        raise MissingArtifactError(data_path)
    raw = data_path.read_bytes()

    arrays = {}
    offset = 0
    for line_number, line in enumerate(lines[2:], start=2):
        if not line.strip():
            continue
        name, *extents = line.split()
        try:
            shape = tuple(int(e) for e in extents)
        except ValueError:
            raise PayloadError(f"Bad shape for {name} in {path}", line_number) from None
        if name in arrays:
            raise PayloadError(f"Duplicate parameter {name} in {path}", line_number)
        nbytes = 4 * int(np.prod(shape, dtype=np.int64))
        if offset + nbytes > len(raw):
            raise PayloadError(
                f"{data_path} truncated: {name} needs {nbytes} bytes, {len(raw) - offset} left", offset
            )
        arrays[name] = np.frombuffer(raw, dtype="<f4", count=nbytes // 4, offset=offset).astype(np.float64).reshape(shape)
        offset += nbytes
    if offset != len(raw):
        raise PayloadError(f"{data_path} has {len(raw) - offset} trailing bytes", offset)
    return arrays


def restore(params: list[Parameter], arrays: dict[str, np.ndarray]) -> None:
    """Copy loaded arrays into parameters, matching by name and checking shapes."""
    for param in params:
        if param.name not in arrays:
            raise PayloadError(f"Checkpoint has no parameter {param.name}", 0)
        value = arrays[param.name]
        if value.shape != param.shape:
            raise ShapeMismatchError(
                f"Checkpoint shape {value.shape} for {param.name} does not match {param.shape}"
            )
        param.data[...] = value
        param.zero_grad()
