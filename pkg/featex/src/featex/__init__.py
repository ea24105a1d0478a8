"""Offline backbone feature extraction for video frames."""

from .extract import (
    BACKBONES,
    ExtractionError,
    ExtractionJob,
    ExtractionResult,
    extract,
    list_frames,
    load_backbone,
    update_manifest,
    write_features,
)

__version__ = "0.1.0"
