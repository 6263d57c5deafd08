"""
CLI module for iskra.

This module provides the command-line interface for training, pruning,
profiling and running the experiment sweeps.
"""

from iskra.cli.commands import main

__all__ = ["main"]
