"""
Data module for iskra.

This module contains the dataset sources:
- generate_synthetic: foreground/background images with known foreground tokens
- load_cifar10_binary: CIFAR-10 binary batches
- load_cifar100_binary: CIFAR-100 binary files with fine or coarse labels
- load_tensor_frames: pre-tensorized event frames (.npz)
- DATASETS, load_dataset: registry by name
"""

from iskra.data.cifar import (
    RECORD_BYTES,
    load_cifar10_binary,
    load_cifar100_binary,
    parse_cifar10_records,
    parse_cifar100_records,
)
from iskra.data.dataset import Batch, Dataset, SyntheticSample
from iskra.data.frames import load_tensor_frames, save_tensor_frames
from iskra.data.registry import DATASETS, load_dataset
from iskra.data.synthetic import SyntheticConfig, class_colors, generate_synthetic

__all__ = [
    "RECORD_BYTES",
    "load_cifar10_binary",
    "load_cifar100_binary",
    "parse_cifar10_records",
    "parse_cifar100_records",
    "Batch",
    "Dataset",
    "SyntheticSample",
    "load_tensor_frames",
    "save_tensor_frames",
    "DATASETS",
    "load_dataset",
    "SyntheticConfig",
    "class_colors",
    "generate_synthetic",
]
