"""Capture adapter: instruments a toy masked-diffusion language model and
writes per-step entropy trajectory datasets in the canonical JSONL format."""

__version__ = "0.1.0"
