"""Differential hierarchies for on-shell scalar products of six-vertex models."""
