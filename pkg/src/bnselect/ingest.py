"""On-disk formats and their parsers.

Formats owned here:

* feature files: magic ``BNF1``, little-endian u32 frame count, u32
  feature dim, then frames*dim float32 values row-major.
* label tables: CSV ``video,object,frame,y`` with 0-based frames.
* performance matrices: CSV ``video,object,anno_frame,eval_frame,jf``.
* masks: binary PGM (``P5``, maxval 255), pixels strictly 0/255.
* manifests: text, one ``key=value ...`` record per line.
* checkpoints: magic ``BNCK``, u32 version, u32 length-prefixed JSON
  config descriptor, float32 weight blob in canonical layer order.

Loads validate everything they can (finiteness, completeness, label
bounds); a file that loads is safe to compute on. All load/save pairs are
inverses.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .net import ModelConfig, ModelWeights

FEATURE_MAGIC = b"BNF1"
CHECKPOINT_MAGIC = b"BNCK"
CHECKPOINT_VERSION = 1

LABEL_HEADER = ["video", "object", "frame", "y"]
PERF_HEADER = ["video", "object", "anno_frame", "eval_frame", "jf"]

_MANIFEST_KEYS = {"video_id", "n_frames", "feature_path", "label_path", "mask_dir"}


class FormatError(ValueError):
    """A file violates its declared on-disk format."""


# ---------------------------------------------------------------------------
# feature files


@dataclass(frozen=True)
class VideoFeatures:
    """Per-frame feature vectors for one video, shape (n_frames, dim)."""

    video_id: str
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise ValueError("feature data must be a 2-D matrix")
        if data.shape[0] < 2:
            raise ValueError("a video needs at least 2 frames")
        if data.shape[1] < 1:
            raise ValueError("feature dim must be >= 1")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature data contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def frame(self, position: int) -> np.ndarray:
        return np.asarray(self.data[position], dtype=np.float64)


def load_features(path, video_id: str | None = None) -> VideoFeatures:
    """Read a feature file; errors name the offending byte offset."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r} at byte 0")
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated header at byte {len(blob)}")
    n_frames, dim = struct.unpack_from("<II", blob, 4)
    expected = 12 + 4 * n_frames * dim
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload ends at byte {len(blob)}, header implies {expected}"
        )
    data = np.frombuffer(blob, dtype="<f4", count=n_frames * dim, offset=12)
    bad = np.flatnonzero(~np.isfinite(data))
    if bad.size:
        raise FormatError(
            f"{path}: non-finite value at byte {12 + 4 * int(bad[0])}"
        )
    data = data.reshape(n_frames, dim)
    return VideoFeatures(video_id or path.stem, data.copy())


def save_features(path, data) -> None:
    """Write a feature file; accepts a matrix or a VideoFeatures."""
    if isinstance(data, VideoFeatures):
        data = data.data
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 1:
        raise ValueError("feature data must be (n_frames >= 2, dim >= 1)")
    if not np.all(np.isfinite(data)):
        raise ValueError("refusing to write non-finite features")
    header = FEATURE_MAGIC + struct.pack("<II", data.shape[0], data.shape[1])
    Path(path).write_bytes(header + data.tobytes())


# ---------------------------------------------------------------------------
# label tables and performance matrices


@dataclass(frozen=True)
class LabelTable:
    """Per (video, object) vector of performance labels, one per frame."""

    entries: dict

    def __post_init__(self):
        for key, y in self.entries.items():
            y = np.asarray(y, dtype=np.float64)
            if y.ndim != 1 or y.size < 1:
                raise ValueError(f"{key}: label vector must be 1-D and non-empty")
            if not np.all(np.isfinite(y)):
                raise ValueError(f"{key}: labels must be finite")
            if np.any(y < 0):
                raise ValueError(f"{key}: labels must be >= 0")
            self.entries[key] = y

    def y(self, video_id: str, object_id: str) -> np.ndarray:
        return self.entries[(video_id, object_id)]

    def units(self) -> list[tuple[str, str]]:
        return sorted(self.entries)

    def __contains__(self, key) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def _read_csv_rows(path, header: list[str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got != header:
            raise FormatError(f"{path}: expected header {','.join(header)}, got {got}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields")
            yield lineno, row


def load_labels(path) -> LabelTable:
    path = Path(path)
    seen: dict[tuple[str, str], dict[int, float]] = {}
    for lineno, row in _read_csv_rows(path, LABEL_HEADER):
        video, obj, frame, y = row
        try:
            frame = int(frame)
            y = float(y)
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        if frame < 0:
            raise FormatError(f"{path}:{lineno}: frames are 0-based, got {frame}")
        per_unit = seen.setdefault((video, obj), {})
        if frame in per_unit:
            raise FormatError(
                f"{path}:{lineno}: duplicate row for ({video}, {obj}, frame {frame})"
            )
        per_unit[frame] = y
    entries = {}
    for key, frames in seen.items():
        n = max(frames) + 1
        missing = sorted(set(range(n)) - set(frames))
        if missing:
            raise FormatError(
                f"{path}: ({key[0]}, {key[1]}) missing frames {missing[:5]}"
            )
        entries[key] = np.array([frames[i] for i in range(n)])
    return LabelTable(entries)


def save_labels(path, table: LabelTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LABEL_HEADER)
        for video, obj in table.units():
            for frame, y in enumerate(table.y(video, obj)):
                writer.writerow([video, obj, frame, repr(float(y))])


@dataclass(frozen=True)
class PerformanceMatrix:
    """Per (video, object) n x n table: entry [i, j] is the quality achieved
    on frame j when frame i is the annotated frame."""

    entries: dict

    def __post_init__(self):
        for key, p in self.entries.items():
            p = np.asarray(p, dtype=np.float64)
            if p.ndim != 2 or p.shape[0] != p.shape[1]:
                raise ValueError(f"{key}: performance matrix must be square")
            if not np.all(np.isfinite(p)):
                raise ValueError(f"{key}: matrix entries must be finite")
            if np.any(p < 0) or np.any(p > 2):
                raise ValueError(f"{key}: matrix entries must lie in [0, 2]")
            self.entries[key] = p

    def matrix(self, video_id: str, object_id: str) -> np.ndarray:
        return self.entries[(video_id, object_id)]

    def units(self) -> list[tuple[str, str]]:
        return sorted(self.entries)


def load_perf_matrix(path) -> PerformanceMatrix:
    path = Path(path)
    cells: dict[tuple[str, str], dict[tuple[int, int], float]] = {}
    for lineno, row in _read_csv_rows(path, PERF_HEADER):
        video, obj, anno, ev, jf = row
        try:
            anno, ev, jf = int(anno), int(ev), float(jf)
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        per_unit = cells.setdefault((video, obj), {})
        if (anno, ev) in per_unit:
            raise FormatError(
                f"{path}:{lineno}: duplicate cell ({video}, {obj}, {anno}, {ev})"
            )
        per_unit[(anno, ev)] = jf
    entries = {}
    for key, unit_cells in cells.items():
        n = max(max(a, e) for a, e in unit_cells) + 1
        if len(unit_cells) != n * n:
            raise FormatError(
                f"{path}: ({key[0]}, {key[1]}) has {len(unit_cells)} cells, "
                f"needs the full {n}x{n}"
            )
        p = np.empty((n, n))
        for (a, e), jf in unit_cells.items():
            p[a, e] = jf
        entries[key] = p
    return PerformanceMatrix(entries)


# ---------------------------------------------------------------------------
# masks


@dataclass(frozen=True)
class Mask:
    """Binary raster; pixels is a bool matrix, True = foreground."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or pixels.size == 0:
            raise ValueError("mask must be a non-empty 2-D raster")
        if pixels.dtype != np.bool_:
            raise ValueError("mask pixels must be boolean")
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def load_mask(path) -> Mask:
    """Read a binary PGM mask; 255 is foreground, 0 background, anything
    else (including other maxvals) is rejected outright."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:2] != b"P5":
        raise FormatError(f"{path}: not a raw PGM (expected P5)")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos: pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos: pos + 1] == b"#":
            while pos < len(blob) and blob[pos: pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos: pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        fields.append(blob[start:pos])
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1:
        raise FormatError(f"{path}: non-positive dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval} (need 255)")
    pos += 1  # single whitespace byte after maxval
    raster = np.frombuffer(blob, dtype=np.uint8, offset=pos)
    if raster.size != width * height:
        raise FormatError(
            f"{path}: raster has {raster.size} bytes, header implies {width * height}"
        )
    bad = np.flatnonzero((raster != 0) & (raster != 255))
    if bad.size:
        raise FormatError(
            f"{path}: pixel value {raster[bad[0]]} at index {int(bad[0])}; "
            "masks must be strictly 0/255"
        )
    return Mask((raster == 255).reshape(height, width))


def save_mask(path, mask: Mask) -> None:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode()
    raster = np.where(mask.pixels, 255, 0).astype(np.uint8)
    Path(path).write_bytes(header + raster.tobytes())


# ---------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class ManifestRecord:
    video_id: str
    n_frames: int
    feature_path: Path
    label_path: Path | None = None
    mask_dir: Path | None = None


@dataclass(frozen=True)
class DatasetManifest:
    """Parsed manifest; paths are resolved against the manifest's directory."""

    records: tuple

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def record(self, video_id: str) -> ManifestRecord:
        for rec in self.records:
            if rec.video_id == video_id:
                return rec
        raise KeyError(video_id)


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    root = path.parent
    records, seen = [], set()
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        kv = {}
        for token in line.split():
            if "=" not in token:
                raise FormatError(f"{path}:{lineno}: expected key=value, got {token!r}")
            key, value = token.split("=", 1)
            if key not in _MANIFEST_KEYS:
                raise FormatError(f"{path}:{lineno}: unknown key {key!r}")
            if key in kv:
                raise FormatError(f"{path}:{lineno}: repeated key {key!r}")
            kv[key] = value
        for required in ("video_id", "n_frames", "feature_path"):
            if required not in kv:
                raise FormatError(f"{path}:{lineno}: missing {required}")
        video_id = kv["video_id"]
        if video_id in seen:
            raise FormatError(f"{path}:{lineno}: duplicate video_id {video_id!r}")
        seen.add(video_id)
        try:
            n_frames = int(kv["n_frames"])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: n_frames must be an integer") from None
        feature_path = root / kv["feature_path"]
        if not feature_path.is_file():
            raise FormatError(f"{path}:{lineno}: missing feature file {feature_path}")
        label_path = root / kv["label_path"] if "label_path" in kv else None
        if label_path is not None and not label_path.is_file():
            raise FormatError(f"{path}:{lineno}: missing label file {label_path}")
        mask_dir = root / kv["mask_dir"] if "mask_dir" in kv else None
        if mask_dir is not None and not mask_dir.is_dir():
            raise FormatError(f"{path}:{lineno}: missing mask dir {mask_dir}")
        records.append(
            ManifestRecord(video_id, n_frames, feature_path, label_path, mask_dir)
        )
    return DatasetManifest(tuple(records))


def save_manifest(path, records) -> None:
    """Write manifest lines; paths are written as given (keep them relative)."""
    lines = []
    for rec in records:
        parts = [
            f"video_id={rec.video_id}",
            f"n_frames={rec.n_frames}",
            f"feature_path={rec.feature_path}",
        ]
        if rec.label_path is not None:
            parts.append(f"label_path={rec.label_path}")
        if rec.mask_dir is not None:
            parts.append(f"mask_dir={rec.mask_dir}")
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# checkpoints


def _config_to_json(cfg: ModelConfig) -> bytes:
    desc = {
        "feature_dim": cfg.feature_dim,
        "num_refs": cfg.num_refs,
        "use_indices": cfg.use_indices,
        "hidden_widths": list(cfg.hidden_widths),
        "leaky_slope": cfg.leaky_slope,
        "dropout_rate": cfg.dropout_rate,
        "drop_index_inputs": cfg.drop_index_inputs,
        "loss_kind": cfg.loss_kind,
        "middle_weight": cfg.middle_weight,
        "middle_index": cfg.middle_index,
    }
    return json.dumps(desc, sort_keys=True, separators=(",", ":")).encode()


def _config_from_json(blob: bytes) -> ModelConfig:
    desc = json.loads(blob.decode())
    desc["hidden_widths"] = tuple(desc["hidden_widths"])
    return ModelConfig(**desc)


def save_checkpoint(path, cfg: ModelConfig, weights: ModelWeights) -> None:
    weights.check_shapes(cfg)
    desc = _config_to_json(cfg)
    vec = weights.to_vector().astype("<f4")
    blob = (
        CHECKPOINT_MAGIC
        + struct.pack("<II", CHECKPOINT_VERSION, len(desc))
        + desc
        + vec.tobytes()
    )
    Path(path).write_bytes(blob)


def load_checkpoint(
    path, expect_config: ModelConfig | None = None
) -> tuple[ModelConfig, ModelWeights]:
    """Read a checkpoint; optionally reject it unless the stored config
    matches ``expect_config`` exactly."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated header")
    version, desc_len = struct.unpack_from("<II", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(
            f"{path}: checkpoint version {version}, supported {CHECKPOINT_VERSION}"
        )
    if len(blob) < 12 + desc_len:
        raise FormatError(f"{path}: truncated config descriptor")
    try:
        cfg = _config_from_json(blob[12: 12 + desc_len])
    except (ValueError, TypeError, KeyError) as exc:
        raise FormatError(f"{path}: bad config descriptor: {exc}") from None
    payload = blob[12 + desc_len :]
    if len(payload) != 4 * cfg.weight_count():
        raise FormatError(
            f"{path}: weight blob holds {len(payload) // 4} values "
            f"(+{len(payload) % 4} bytes), config implies {cfg.weight_count()}"
        )
    if expect_config is not None and cfg != expect_config:
        raise FormatError(
            f"{path}: checkpoint config does not match the requested "
            f"configuration (stored {cfg}, requested {expect_config})"
        )
    vec = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(vec))
    if bad.size:
        raise FormatError(
            f"{path}: non-finite weight at index {int(bad[0])}"
        )
    return cfg, ModelWeights.from_vector(cfg, vec)


# ---------------------------------------------------------------------------
# dataset assembly


@dataclass(frozen=True)
class VideoUnit:
    """One (video, object) evaluation unit with features and labels joined."""

    video_id: str
    object_id: str
    features: VideoFeatures
    labels: np.ndarray


def load_units(manifest: DatasetManifest, labels: LabelTable) -> list[VideoUnit]:
    """Join a manifest with a label table into per-object units.

    Every manifest video must carry at least one labeled object and label
    vectors must match the declared frame counts; extra label entries for
    videos outside the manifest are ignored.
    """
    units = []
    for rec in manifest:
        feats = load_features(rec.feature_path, video_id=rec.video_id)
        if feats.n_frames != rec.n_frames:
            raise FormatError(
                f"{rec.video_id}: manifest says {rec.n_frames} frames, "
                f"feature file has {feats.n_frames}"
            )
        object_ids = [obj for v, obj in labels.units() if v == rec.video_id]
        if not object_ids:
            raise FormatError(f"{rec.video_id}: no labels for this video")
        for obj in object_ids:
            y = labels.y(rec.video_id, obj)
            if len(y) != feats.n_frames:
                raise FormatError(
                    f"({rec.video_id}, {obj}): {len(y)} labels for "
                    f"{feats.n_frames} frames"
                )
            units.append(VideoUnit(rec.video_id, obj, feats, y))
    return units
