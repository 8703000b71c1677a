"""Desk-scale contrastive semi-supervised learning and learning with noisy
labels: a small float64 autodiff core, MLP encoder/projector/classifier
models, InfoNCE-style losses, MixMatch-style semi-supervised training,
GMM loss partitioning and two-network co-divide training loops."""

__version__ = "0.1.0"
