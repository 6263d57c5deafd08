"""
Storage module for iskra.

This module contains the checkpoint persistence layer:
- CheckpointStorage: JSON manifest + little-endian blob, packed-bit masks
"""

from iskra.storage.checkpoint import CHECKPOINT_VERSION, CheckpointStorage

__all__ = ["CHECKPOINT_VERSION", "CheckpointStorage"]
