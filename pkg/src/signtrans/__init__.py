"""Desk-scale, gloss-free sign language translation toolkit.

Pose-keypoint clips go through a graph-convolution backbone, a transformer
encoder/decoder generates the spoken-language translation, and training can
add a contrastive anchor-word objective on the encoded visual features.
Everything runs on CPU with a built-in reverse-mode autodiff engine so the
whole pipeline is verifiable by gradient checks and synthetic-data runs.
"""

__version__ = "0.1.0"
