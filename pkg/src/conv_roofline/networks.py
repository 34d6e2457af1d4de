"""Named convolutional layers from VGG-16 and AlexNet, plus user layer files.

Image sizes include the zero padding each layer applies, so a padded 3x3
layer on 224x224 inputs is listed with x = 226. AlexNet conv1 is strided
and has no place in a unit-stride model, so it is left out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .model import LayerShape

DEFAULT_BATCH = 64


@dataclass(frozen=True)
class LayerCatalogEntry:
    network: str
    layer: str
    shape: LayerShape

    @property
    def key(self) -> str:
        return f"{self.network}{self.layer}"


# network, layer, C, C', x (padded), r
_LAYERS = (
    ("vgg", "1.1", 3, 64, 226, 3),
    ("vgg", "1.2", 64, 64, 226, 3),
    ("vgg", "2.1", 64, 128, 114, 3),
    ("vgg", "2.2", 128, 128, 114, 3),
    ("vgg", "3.1", 128, 256, 58, 3),
    ("vgg", "3.2", 256, 256, 58, 3),
    ("vgg", "4.1", 256, 512, 30, 3),
    ("vgg", "4.2", 512, 512, 30, 3),
    ("vgg", "5.1", 512, 512, 16, 3),
    ("alexnet", "2", 64, 192, 31, 5),
    ("alexnet", "3", 192, 384, 15, 3),
    ("alexnet", "4", 384, 256, 15, 3),
    ("alexnet", "5", 256, 256, 15, 3),
)


def layer_catalog(batch: int = DEFAULT_BATCH) -> tuple[LayerCatalogEntry, ...]:
    return tuple(
        LayerCatalogEntry(net, name, LayerShape(batch, c, cp, x, r))
        for net, name, c, cp, x, r in _LAYERS
    )


def find_layer(name: str, batch: int = DEFAULT_BATCH) -> LayerShape:
    """Look up a catalog layer by key such as ``vgg3.2`` or ``alexnet2`` (case-insensitive)."""
    wanted = name.strip().lower().replace(" ", "")
    for entry in layer_catalog(batch):
        if entry.key == wanted:
            return entry.shape
    known = ", ".join(e.key for e in layer_catalog(batch))
    raise KeyError(f"unknown layer {name!r}; known layers: {known}")


def load_layer(path: str | Path) -> LayerShape:
    """Read a layer from a JSON object with batch/in_channels/out_channels/image_size/kernel_size
    (or the short keys B/C/C_out/x/r)."""
    record = json.loads(Path(path).read_text())
    if not isinstance(record, dict):
        raise ValueError(f"{path}: layer file must hold a JSON object")
    return LayerShape.from_dict(record)


def resolve_layer(spec: str, batch: int | None = None) -> LayerShape:
    """A catalog key, or a path to a JSON layer file. ``batch`` overrides B."""
    path = Path(spec)
    if spec.endswith(".json") or path.is_file():
        layer = load_layer(path)
        return layer.replace(batch=batch) if batch else layer
    return find_layer(spec, batch or DEFAULT_BATCH)
