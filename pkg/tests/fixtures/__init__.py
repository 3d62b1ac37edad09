"""Test fixture helpers for scenario files."""
