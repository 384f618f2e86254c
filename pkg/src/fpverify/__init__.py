"""Verifier for floating-point peephole optimizations."""

from pathlib import Path

__version__ = "0.1.0"

# bundled .opt files
CORPUS = Path(__file__).with_name("corpus")
