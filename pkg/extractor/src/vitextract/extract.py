"""Batched feature extraction into SOFB files.

Images stream through the backbone's published preprocessing (resize and
center-crop to the model's input resolution, ImageNet normalization) and
the frozen model's class-token output lands in the feature file one row
per image, in dataset order. A JSON manifest written next to the feature
file pins everything that determined the bytes: dataset, split, model hub
id, preprocessing, library versions, row count and any index filter, so a
re-extraction under the same manifest reproduces the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torchvision import transforms

from .backbones import IMAGENET_MEAN, IMAGENET_STD, BackboneSpec, get_backbone
from .datasets import ImageSource, open_dataset
from .writer import FeatureFileWriter


@dataclass(frozen=True)
class ExtractJob:
    dataset: str
    split: str
    model: str
    out_path: Path
    batch_size: int = 64
    device: str = "cpu"
    indices: tuple[int, ...] | None = None
    data_root: str = "data"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.indices is not None:
            idx = self.indices
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise ValueError("index list must be strictly increasing")
            if idx and idx[0] < 0:
                raise ValueError("indices must be non-negative")


def read_index_file(path) -> tuple[int, ...]:
    values = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            values.append(int(line))
    return tuple(values)


def _preprocessing(spec: BackboneSpec) -> transforms.Compose:
    return transforms.Compose(
        [
            transforms.Resize(spec.input_size, interpolation=transforms.InterpolationMode.BICUBIC),
            transforms.CenterCrop(spec.input_size),
            transforms.ToTensor(),
            transforms.Normalize(mean=IMAGENET_MEAN, std=IMAGENET_STD),
        ]
    )


def _iter_selected(source: ImageSource, indices: tuple[int, ...] | None):
    if indices is None:
        yield from source
        return
    if indices and indices[-1] >= len(source):
        raise ValueError(
            f"index {indices[-1]} out of range for dataset of {len(source)} images"
        )
    wanted = iter(indices)
    target = next(wanted, None)
    for position, image in enumerate(source):
        if target is None:
            break
        if position == target:
            yield image
            target = next(wanted, None)


def extract(job: ExtractJob, backbone: torch.nn.Module | None = None) -> dict:
    """Run the job; returns the manifest that was written.

    ``backbone`` lets callers supply an already-loaded (or surrogate) model;
    by default the registry's pre-trained weights are fetched.
    """
    spec = get_backbone(job.model)
    source = open_dataset(job.dataset, job.split, job.data_root)
    expected_rows = len(job.indices) if job.indices is not None else len(source)

    if backbone is None:
        try:
            backbone = spec.loader()
        except Exception as exc:
            raise RuntimeError(
                f"could not load weights for {spec.name} ({spec.hub_id}): {exc}. "
                "Check network access or the torch hub cache."
            ) from exc
    device = torch.device(job.device)
    backbone = backbone.to(device)
    backbone.eval()
    transform = _preprocessing(spec)

    out_path = Path(job.out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with torch.no_grad(), FeatureFileWriter(out_path, spec.embed_dim) as writer:
        batch: list[torch.Tensor] = []

        def flush():
            if not batch:
                return
            stacked = torch.stack(batch).to(device)
            features = backbone(stacked)
            if features.ndim != 2 or features.shape[1] != spec.embed_dim:
                raise RuntimeError(
                    f"backbone produced shape {tuple(features.shape)}, "
                    f"declared embedding width is {spec.embed_dim}"
                )
            writer.append(features.cpu().numpy().astype(np.float32))
            batch.clear()

        for image in _iter_selected(source, job.indices):
            batch.append(transform(image))
            if len(batch) == job.batch_size:
                flush()
        flush()
        rows = writer.rows

    if rows != expected_rows:
        out_path.unlink(missing_ok=True)
        raise RuntimeError(f"expected {expected_rows} rows, extracted {rows}")

    import torchvision

    manifest = {
        "format": {"magic": "SOFB", "version": 1},
        "dataset": source.name,
        "split": job.split,
        "model": spec.name,
        "model_hub_id": spec.hub_id,
        "embed_dim": spec.embed_dim,
        "preprocessing": {
            "resize": spec.input_size,
            "center_crop": spec.input_size,
            "interpolation": "bicubic",
            "normalize_mean": list(IMAGENET_MEAN),
            "normalize_std": list(IMAGENET_STD),
        },
        "row_count": rows,
        "index_filter_count": None if job.indices is None else len(job.indices),
        "torch_version": torch.__version__,
        "torchvision_version": torchvision.__version__,
        "inference": {"mode": "eval", "grad": False, "device": job.device},
    }
    manifest_path = out_path.with_name(out_path.name + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
