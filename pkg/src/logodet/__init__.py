"""Region-proposal logo detection: selective-search proposals, pluggable
region scoring, NMS, threshold-based no-logo rejection, and mAP/F1 evaluation."""

__version__ = "0.1.0"
