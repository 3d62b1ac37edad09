"""Dynamical systems, box graphs, symbolic codings and the scenario pipeline."""
