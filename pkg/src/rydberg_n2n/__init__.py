"""Noisy-pair self-supervised denoising for Rydberg-sensor IF traces."""

__version__ = "0.1.0"
