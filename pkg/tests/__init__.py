"""Pytest package marker for Local Query Coverage Analytics."""
