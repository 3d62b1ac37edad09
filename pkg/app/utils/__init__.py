"""Utility helpers: configuration, logging and shared constants."""
