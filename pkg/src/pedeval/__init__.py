"""Segmentation-aware evaluation of pedestrian detectors."""

__version__ = "0.1.0"
