"""Run a pretrained classification backbone over ordered video frames and
write one pooled feature vector per frame.

Output is the selection toolkit's feature file format: magic ``BNF1``,
little-endian u32 frame count and feature dim, then float32 values
row-major in frame order. Frames are taken from a directory of image
files whose lexicographic order is the temporal order.

Features are the backbone's penultimate globally-average-pooled
activations. Preprocessing: shorter side resized to 256, center crop to
224, ImageNet normalization. Extraction is deterministic for a fixed
backbone and preprocessing.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import models, transforms

FEATURE_MAGIC = b"BNF1"

FRAME_EXTENSIONS = {".jpg", ".jpeg", ".png", ".bmp", ".pgm", ".ppm"}

BACKBONES = {
    "resnet18": models.resnet18,
    "resnet34": models.resnet34,
    "resnet50": models.resnet50,
    "resnet101": models.resnet101,
}

_PREPROCESS = transforms.Compose(
    [
        transforms.Resize(256),
        transforms.CenterCrop(224),
        transforms.ToTensor(),
        transforms.Normalize(
            mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]
        ),
    ]
)


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtractionJob:
    frames_dir: Path
    out_path: Path
    backbone: str = "resnet50"
    pretrained: bool = True
    batch_size: int = 8
    init_seed: int = 0  # backbone init when pretrained weights are off


@dataclass(frozen=True)
class ExtractionResult:
    out_path: Path
    n_frames: int
    dim: int


def list_frames(frames_dir) -> list[Path]:
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise ExtractionError(f"{frames_dir} is not a directory")
    frames = sorted(
        p for p in frames_dir.iterdir()
        if p.is_file() and p.suffix.lower() in FRAME_EXTENSIONS
    )
    if len(frames) < 2:
        raise ExtractionError(
            f"{frames_dir}: found {len(frames)} readable frames, need at least 2"
        )
    return frames


def load_backbone(name: str, pretrained: bool = True, init_seed: int = 0):
    """Backbone with its classifier head removed; outputs pooled features.

    With ``pretrained=False`` the weights are seeded random: useless for
    recognition but deterministic, which is all the format tests need.
    """
    if name not in BACKBONES:
        raise ExtractionError(f"unknown backbone {name!r}; choose from {sorted(BACKBONES)}")
    ctor = BACKBONES[name]
    if pretrained:
        try:
            model = ctor(weights="IMAGENET1K_V1")
        except Exception as exc:
            raise ExtractionError(
                f"could not load pretrained weights for {name} ({exc}); "
                "pass --no-pretrained to use a seeded random backbone"
            ) from exc
    else:
        torch.manual_seed(init_seed)
        model = ctor(weights=None)
    trunk = torch.nn.Sequential(*list(model.children())[:-1], torch.nn.Flatten())
    trunk.eval()
    return trunk


def _load_image(path: Path) -> torch.Tensor:
    try:
        with Image.open(path) as img:
            return _PREPROCESS(img.convert("RGB"))
    except ExtractionError:
        raise
    except Exception as exc:
        raise ExtractionError(f"unreadable frame {path}: {exc}") from exc


def write_features(path, data: np.ndarray) -> None:
    """Atomic feature-file write: temp file in place, then rename."""
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 1:
        raise ExtractionError("feature matrix must be (n_frames >= 2, dim >= 1)")
    if not np.all(np.isfinite(data)):
        raise ExtractionError("refusing to write non-finite features")
    path = Path(path)
    header = FEATURE_MAGIC + struct.pack("<II", data.shape[0], data.shape[1])
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(header + data.tobytes())
    os.replace(tmp, path)


def extract(job: ExtractionJob, model=None) -> ExtractionResult:
    """Extract features for every frame and write the feature file.

    A preloaded ``model`` (from ``load_backbone``) can be passed to amortize
    backbone construction over many videos.
    """
    frames = list_frames(job.frames_dir)
    if model is None:
        model = load_backbone(job.backbone, job.pretrained, job.init_seed)
    chunks = []
    with torch.no_grad():
        for start in range(0, len(frames), job.batch_size):
            batch = torch.stack(
                [_load_image(p) for p in frames[start : start + job.batch_size]]
            )
            chunks.append(model(batch).numpy())
    feats = np.concatenate(chunks, axis=0)
    write_features(job.out_path, feats)
    return ExtractionResult(Path(job.out_path), feats.shape[0], feats.shape[1])


def _record_video_id(line: str) -> str | None:
    for token in line.split():
        if token.startswith("video_id="):
            return token.split("=", 1)[1]
    return None


def update_manifest(manifest_path, video_id: str, n_frames: int, feature_path) -> None:
    """Append or replace this video's record in a manifest file.

    Records are single lines of ``key=value`` pairs; other videos' lines
    are preserved verbatim.
    """
    manifest_path = Path(manifest_path)
    line = f"video_id={video_id} n_frames={n_frames} feature_path={feature_path}"
    lines = []
    if manifest_path.exists():
        lines = [
            existing
            for existing in manifest_path.read_text().splitlines()
            if existing.strip() and _record_video_id(existing) != video_id
        ]
    lines.append(line)
    manifest_path.write_text("\n".join(lines) + "\n")
