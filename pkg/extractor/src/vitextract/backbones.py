"""Frozen backbone registry.

Each entry knows its embedding width, its input preprocessing, and how to
load the pre-trained weights. Models are used as-is (eval mode, no
gradients, class-token output); nothing here trains or fine-tunes.

``dino-vitb`` is the original self-distilled ViT-B/16 checkpoint;
``dino-vitl`` is the ViT-L/14 successor (the original release has no
ViT-L, so the large variant comes from the follow-up hub). The manifest
records the exact hub id so downstream results stay labeled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    hub_id: str
    embed_dim: int
    input_size: int
    loader: Callable[[], torch.nn.Module]


def _load_dino_vitb() -> torch.nn.Module:
    return torch.hub.load("facebookresearch/dino:main", "dino_vitb16")


def _load_dino_vitl() -> torch.nn.Module:
    return torch.hub.load("facebookresearch/dinov2", "dinov2_vitl14")


_REGISTRY: dict[str, BackboneSpec] = {}


def register_backbone(spec: BackboneSpec) -> None:
    _REGISTRY[spec.name] = spec


def get_backbone(name: str) -> BackboneSpec:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown backbone {name!r}; registered: {sorted(_REGISTRY)}"
        ) from None


def backbone_names() -> list[str]:
    return sorted(_REGISTRY)


register_backbone(
    BackboneSpec(
        name="dino-vitb",
        hub_id="facebookresearch/dino:main/dino_vitb16",
        embed_dim=768,
        input_size=224,
        loader=_load_dino_vitb,
    )
)
register_backbone(
    BackboneSpec(
        name="dino-vitl",
        hub_id="facebookresearch/dinov2/dinov2_vitl14",
        embed_dim=1024,
        input_size=224,
        loader=_load_dino_vitl,
    )
)
