import numpy as np
import pytest
from PIL import Image

from featex.cli import main
from featex.extract import (
    ExtractionError,
    ExtractionJob,
    extract,
    list_frames,
    load_backbone,
    update_manifest,
    write_features,
)

# the primary toolkit is the consumer of these files; its loader is the
# round-trip contract
from bnselect.ingest import load_features

BACKBONE = "resnet18"  # smallest; weight provenance is irrelevant here


@pytest.fixture(scope="module")
def backbone():
    return load_backbone(BACKBONE, pretrained=False, init_seed=0)


def write_frames(frames_dir, n=3, size=(64, 48), seed=0):
    frames_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n):
        data = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
        Image.fromarray(data).save(frames_dir / f"frame_{i:04d}.png")
    return frames_dir


def test_list_frames_sorted(tmp_path):
    d = write_frames(tmp_path / "v", n=4)
    (d / "notes.txt").write_text("not a frame")
    frames = list_frames(d)
    assert [p.name for p in frames] == [f"frame_{i:04d}.png" for i in range(4)]


def test_list_frames_requires_two(tmp_path):
    d = tmp_path / "v"
    d.mkdir()
    Image.new("RGB", (8, 8)).save(d / "only.png")
    with pytest.raises(ExtractionError, match="at least 2"):
        list_frames(d)


def test_extract_round_trips_into_primary_loader(tmp_path, backbone):
    d = write_frames(tmp_path / "v", n=3)
    out = tmp_path / "v.bnf"
    job = ExtractionJob(d, out, backbone=BACKBONE, pretrained=False)
    result = extract(job, model=backbone)
    assert result.n_frames == 3

    feats = load_features(out)
    assert feats.n_frames == 3
    assert feats.dim == result.dim == 512
    assert np.all(np.isfinite(feats.data))


def test_extract_identical_frames_identical_rows(tmp_path, backbone):
    d = tmp_path / "v"
    d.mkdir()
    rng = np.random.default_rng(1)
    data = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
    for i in range(3):
        Image.fromarray(data).save(d / f"frame_{i}.png")
    out = tmp_path / "v.bnf"
    extract(ExtractionJob(d, out, backbone=BACKBONE, pretrained=False), model=backbone)
    feats = load_features(out)
    np.testing.assert_array_equal(feats.data[0], feats.data[1])
    np.testing.assert_array_equal(feats.data[0], feats.data[2])


def test_reextraction_is_bit_identical(tmp_path, backbone):
    d = write_frames(tmp_path / "v", n=4, seed=2)
    first = tmp_path / "a.bnf"
    second = tmp_path / "b.bnf"
    extract(ExtractionJob(d, first, backbone=BACKBONE, pretrained=False), model=backbone)
    extract(ExtractionJob(d, second, backbone=BACKBONE, pretrained=False), model=backbone)
    assert first.read_bytes() == second.read_bytes()


def test_unreadable_frame_names_file(tmp_path, backbone):
    d = write_frames(tmp_path / "v", n=3, seed=3)
    (d / "frame_0001.png").write_bytes(b"not an image")
    with pytest.raises(ExtractionError, match="frame_0001.png"):
        extract(
            ExtractionJob(d, tmp_path / "v.bnf", backbone=BACKBONE, pretrained=False),
            model=backbone,
        )


def test_write_features_rejects_bad_shapes(tmp_path):
    with pytest.raises(ExtractionError, match="n_frames"):
        write_features(tmp_path / "x.bnf", np.zeros((1, 4), dtype=np.float32))
    with pytest.raises(ExtractionError, match="non-finite"):
        write_features(tmp_path / "x.bnf", np.full((2, 2), np.nan, dtype=np.float32))


def test_write_features_is_atomic(tmp_path):
    out = tmp_path / "v.bnf"
    write_features(out, np.ones((2, 3), dtype=np.float32))
    assert out.exists()
    assert not (tmp_path / "v.bnf.tmp").exists()


def test_update_manifest_appends_and_replaces(tmp_path):
    manifest = tmp_path / "m.txt"
    update_manifest(manifest, "a", 4, "a.bnf")
    update_manifest(manifest, "b", 6, "b.bnf")
    update_manifest(manifest, "a", 5, "a_v2.bnf")
    lines = manifest.read_text().splitlines()
    assert len(lines) == 2
    assert lines[0].startswith("video_id=b")
    assert "n_frames=5" in lines[1] and "a_v2.bnf" in lines[1]


def test_unknown_backbone_rejected():
    with pytest.raises(ExtractionError, match="unknown backbone"):
        load_backbone("vgg99", pretrained=False)


def test_cli_end_to_end(tmp_path, capsys):
    d = write_frames(tmp_path / "clip", n=3, seed=4)
    out = tmp_path / "clip.bnf"
    manifest = tmp_path / "m.txt"
    code = main([
        "--frames", str(d), "--out", str(out), "--backbone", BACKBONE,
        "--no-pretrained", "--manifest", str(manifest),
    ])
    assert code == 0
    assert "3 frames" in capsys.readouterr().out
    assert load_features(out).n_frames == 3
    assert "video_id=clip" in manifest.read_text()


def test_cli_reports_errors(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code = main(["--frames", str(empty), "--out", str(tmp_path / "x.bnf"),
                 "--backbone", BACKBONE, "--no-pretrained"])
    assert code == 1
    assert "error:" in capsys.readouterr().err
