"""Catalog engine for locally rigid packings of congruent circles on the sphere."""

__version__ = "0.1.0"

from .planegraph import PlaneGraph, Face, canonical_code, trace_faces  # noqa: F401
