"""Frozen ViT feature export in the SOFB wire format."""

from .backbones import BackboneSpec, backbone_names, get_backbone, register_backbone
from .datasets import ImageSource, open_dataset
from .extract import ExtractJob, extract, read_index_file
from .writer import FeatureFileWriter

__version__ = "0.1.0"

__all__ = [
    "BackboneSpec",
    "ExtractJob",
    "FeatureFileWriter",
    "ImageSource",
    "backbone_names",
    "extract",
    "get_backbone",
    "open_dataset",
    "read_index_file",
    "register_backbone",
]
