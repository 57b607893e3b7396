"""Semantic navigation framework: tiered knowledge, map generation,
behavior planning, and dynamic navigation for mobile robots."""

__version__ = "0.1.0"
