"""Plain-text model dump.

Layout::

    gasforge-model 1
    kind <linear|mlp|nam>
    n_features <int>
    widths <int> ...
    activation <name>
    params <count>
    <shape dims...>
    <row-major values...>
    ...   (two lines per parameter array, in ``model.params`` order)
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .linear import LinearModel
from .mlp import MlpModel
from .nam import NamModel

MAGIC = "gasforge-model"
VERSION = 1


def save_model(model, path: str | Path) -> None:
    widths = getattr(model, "widths", [])
    lines = [
        f"{MAGIC} {VERSION}",
        f"kind {model.kind}",
        f"n_features {model.n_features}",
        "widths " + " ".join(str(w) for w in widths),
        f"activation {getattr(model, 'activation', 'none')}",
        f"params {len(model.params)}",
    ]
    for p in model.params:
        lines.append(" ".join(str(d) for d in p.shape))
        lines.append(" ".join(repr(float(v)) for v in p.reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path):
    lines = Path(path).read_text().split("\n")
    magic, version = lines[0].split()
    if magic != MAGIC or int(version) != VERSION:
        raise ValueError(f"{path}: not a version-{VERSION} model file")
    header = {}
    for line in lines[1:6]:
        key, _, rest = line.partition(" ")
        header[key] = rest
    kind = header["kind"]
    n = int(header["n_features"])
    widths = [int(w) for w in header["widths"].split()]
    activation = header["activation"]
    count = int(header["params"])
    arrays = []
    for i in range(count):
        shape_line = lines[6 + 2 * i].strip()
        shape = tuple(int(d) for d in shape_line.split()) if shape_line else ()
        vals = [float(v) for v in lines[7 + 2 * i].split()]
        arrays.append(np.array(vals, dtype=np.float64).reshape(shape))

    if kind == "linear":
        model = LinearModel(np.zeros(n))
    elif kind == "mlp":
        model = MlpModel.init(n, widths, activation)
    elif kind == "nam":
        model = NamModel.init(n, widths, activation)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    if len(model.params) != count:
        raise ValueError(f"{path}: expected {len(model.params)} parameter arrays, found {count}")
    for dst, src in zip(model.params, arrays):
        if dst.shape != src.shape:
            raise ValueError(f"{path}: parameter shape {src.shape} does not match {dst.shape}")
        dst[...] = src
    return model
