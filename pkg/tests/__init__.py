"""Tests for the iskra package."""
