"""Cross-sensor plausibility labeling for raw radar detections."""

__version__ = "0.1.0"
