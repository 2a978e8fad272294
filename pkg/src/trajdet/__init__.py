"""Hallucination detection for diffusion language models from
denoising-uncertainty trajectories."""

__version__ = "0.1.0"
