"""Image sources.

The three benchmark names map to torchvision datasets (downloaded on
demand). A path of the form ``folder:<dir>`` loads every image file in the
directory in sorted filename order, which keeps toy fixtures and ad-hoc
exports deterministic. Iteration order always matches dataset order so
label CSVs align by row index.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

from PIL import Image

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}

_SPLITS = {
    "cifar10": ("train", "test"),
    "cifar100": ("train", "test"),
    "stl10": ("train", "test", "unlabeled"),
}


class ImageSource:
    """len() plus ordered iteration of PIL images."""

    def __init__(self, name: str, count: int, images: Iterator[Image.Image]):
        self.name = name
        self._count = count
        self._images = images

    def __len__(self) -> int:
        return self._count

    def __iter__(self) -> Iterator[Image.Image]:
        return self._images


def _folder_source(root: Path) -> ImageSource:
    if not root.is_dir():
        raise FileNotFoundError(f"image folder does not exist: {root}")
    files = sorted(
        p for p in root.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES
    )
    if not files:
        raise FileNotFoundError(f"no image files in {root}")

    def generate():
        for path in files:
            with Image.open(path) as img:
                yield img.convert("RGB")

    return ImageSource(f"folder:{root}", len(files), generate())


def _torchvision_source(name: str, split: str, root: str) -> ImageSource:
    from torchvision import datasets as tvd

    if split not in _SPLITS[name]:
        raise ValueError(f"dataset {name} has splits {_SPLITS[name]}, not {split!r}")
    if name == "cifar10":
        ds = tvd.CIFAR10(root, train=split == "train", download=True)
    elif name == "cifar100":
        ds = tvd.CIFAR100(root, train=split == "train", download=True)
    else:
        ds = tvd.STL10(root, split=split, download=True)

    def generate():
        for i in range(len(ds)):
            image, _ = ds[i]
            yield image.convert("RGB")

    return ImageSource(f"{name}/{split}", len(ds), generate())


def open_dataset(dataset: str, split: str, root: str = "data") -> ImageSource:
    """``cifar10``/``cifar100``/``stl10`` (torchvision) or ``folder:<dir>``."""
    if dataset.startswith("folder:"):
        return _folder_source(Path(dataset.split(":", 1)[1]))
    if dataset not in _SPLITS:
        raise ValueError(
            f"unknown dataset {dataset!r}; use one of {sorted(_SPLITS)} or folder:<dir>"
        )
    try:
        return _torchvision_source(dataset, split, root)
    except Exception as exc:
        raise RuntimeError(
            f"could not load {dataset}/{split}: {exc}. "
            "Check network access or pre-download into the data root."
        ) from exc
