import numpy as np
import pytest

from semigmm import dedup
from semigmm.errors import TruncationError


def _images(count, seed, w=8, h=8, c=3):
    rng = np.random.default_rng(seed)
    return [rng.integers(0, 256, size=w * h * c, dtype=np.uint8).tobytes() for _ in range(count)]


def test_hash_deterministic():
    buf = bytes(range(192)) * 1
    a = dedup.hash_image(buf, 8, 8, 3)
    b = dedup.hash_image(buf, 8, 8, 3)
    assert a == b
    assert len(a.digest) == 32


def test_hash_zero_buffer():
    buf = bytes(96 * 96 * 3)
    assert dedup.hash_image(buf, 96, 96, 3) == dedup.hash_image(bytes(96 * 96 * 3), 96, 96, 3)


def test_single_byte_flip_changes_digest():
    rng = np.random.default_rng(0)
    base = rng.integers(0, 256, size=192, dtype=np.uint8)
    reference = dedup.hash_image(base.tobytes(), 8, 8, 3)
    for _ in range(50):
        flipped = base.copy()
        pos = int(rng.integers(192))
        flipped[pos] ^= np.uint8(1 + rng.integers(255))
        assert dedup.hash_image(flipped.tobytes(), 8, 8, 3) != reference


def test_hash_rejects_wrong_length():
    with pytest.raises(ValueError):
        dedup.hash_image(b"\x00" * 100, 8, 8, 3)


def test_index_three_distinct():
    images = _images(3, seed=1)
    index = dedup.build_test_index(images, 8, 8, 3)
    assert len(index.by_digest) == 3
    assert index.intra_test_duplicates == ()


def test_index_intra_test_duplicate_keeps_smallest():
    images = _images(3, seed=2)
    images.append(images[1])
    index = dedup.build_test_index(images, 8, 8, 3)
    assert len(index.by_digest) == 3
    assert index.intra_test_duplicates == ((1, 3),)
    digest = dedup.hash_image(images[1], 8, 8, 3).digest
    assert index.by_digest[digest] == 1


def test_empty_test_set_keeps_all_train():
    index = dedup.build_test_index([], 8, 8, 3)
    train = _images(5, seed=3)
    report = dedup.scan_train([train], index, 8, 8, 3)
    assert report.duplicates == ()
    assert report.valid_indices == tuple(range(5))


def test_disjoint_sets_have_no_duplicates():
    index = dedup.build_test_index(_images(10, seed=4), 8, 8, 3)
    report = dedup.scan_train([_images(20, seed=5)], index, 8, 8, 3)
    assert report.duplicates == ()
    assert report.valid_indices == tuple(range(20))


def test_planted_duplicate_found():
    test_images = _images(10, seed=6)
    train_images = _images(10, seed=7)
    train_images[3] = test_images[7]
    index = dedup.build_test_index(test_images, 8, 8, 3)
    report = dedup.scan_train([train_images], index, 8, 8, 3)
    expected_hex = dedup.hash_image(test_images[7], 8, 8, 3).hex
    assert report.duplicates == ((3, 7, expected_hex),)
    assert 3 not in report.valid_indices
    assert len(report.duplicates) + len(report.valid_indices) == 10


def _batched(images, size):
    return [images[i : i + size] for i in range(0, len(images), size)]


def test_batch_size_invariance():
    test_images = _images(30, seed=8)
    train_images = _images(100, seed=9)
    for src, dst in ((2, 11), (5, 60), (29, 99)):
        train_images[dst] = test_images[src]
    index = dedup.build_test_index(test_images, 8, 8, 3)
    reports = [
        dedup.scan_train(_batched(train_images, size), index, 8, 8, 3)
        for size in (1, 7, 100)
    ]
    assert reports[0] == reports[1] == reports[2]
    assert len(reports[0].duplicates) == 3


def test_idempotence():
    test_images = _images(20, seed=10)
    train_images = _images(50, seed=11)
    train_images[0] = test_images[0]
    train_images[13] = test_images[4]
    index = dedup.build_test_index(test_images, 8, 8, 3)
    first = dedup.scan_train([train_images], index, 8, 8, 3)
    cleaned = [train_images[i] for i in first.valid_indices]
    second = dedup.scan_train([cleaned], index, 8, 8, 3)
    assert second.duplicates == ()
    assert len(second.valid_indices) == len(first.valid_indices)


def test_write_report_csv(tmp_path):
    report = dedup.DedupReport(duplicates=((3, 7, "ab" * 32),), valid_indices=(0, 1, 2))
    path = tmp_path / "report.csv"
    assert dedup.write_report(report, path) is True
    lines = path.read_text().splitlines()
    assert lines == ["train_index,test_index,hash", f"3,7,{'ab' * 32}"]


def test_write_report_skipped_when_empty(tmp_path):
    report = dedup.DedupReport(duplicates=(), valid_indices=(0, 1))
    path = tmp_path / "report.csv"
    assert dedup.write_report(report, path) is False
    assert not path.exists()


def test_valid_indices_file(tmp_path):
    report = dedup.DedupReport(duplicates=((1, 0, "00" * 32),), valid_indices=(0, 2, 3))
    path = tmp_path / "valid.txt"
    dedup.write_valid_indices(report, path)
    assert path.read_text().splitlines() == ["0", "2", "3"]


def _write_dataset(tmp_path, train_images, test_images, w=8, h=8, c=3):
    train_bin = tmp_path / "train.bin"
    test_bin = tmp_path / "test.bin"
    train_bin.write_bytes(b"".join(train_images))
    test_bin.write_bytes(b"".join(test_images))
    manifest = tmp_path / "manifest.toml"
    manifest.write_text(
        f"width = {w}\nheight = {h}\nchannels = {c}\n"
        f"[train]\ncount = {len(train_images)}\n"
        f"[test]\ncount = {len(test_images)}\n"
    )
    return train_bin, test_bin, manifest


def test_run_dedup_end_to_end(tmp_path):
    test_images = _images(10, seed=12)
    train_images = _images(25, seed=13)
    train_images[4] = test_images[2]
    train_bin, test_bin, manifest = _write_dataset(tmp_path, train_images, test_images)
    report = dedup.run_dedup(train_bin, test_bin, manifest, batch_size=4)
    assert len(report.duplicates) == 1
    assert report.duplicates[0][:2] == (4, 2)


def test_iter_batches_validates_file_size(tmp_path):
    path = tmp_path / "broken.bin"
    path.write_bytes(b"\x00" * 100)
    with pytest.raises(TruncationError):
        list(dedup.iter_image_batches(path, count=2, record_size=192, batch_size=1))


def test_manifest_validation(tmp_path):
    manifest = tmp_path / "manifest.toml"
    manifest.write_text("width = 0\nheight = 8\nchannels = 3\n[train]\ncount = 1\n[test]\ncount = 1\n")
    with pytest.raises(Exception):
        dedup.read_manifest(manifest)
    manifest.write_text("width = 8\nheight = 8\n[train]\ncount = 1\n[test]\ncount = 1\n")
    with pytest.raises(KeyError):
        dedup.read_manifest(manifest)


def test_cli_dedup(tmp_path, capsys):
    from semigmm.cli import main

    test_images = _images(10, seed=14)
    train_images = _images(30, seed=15)
    train_images[9] = test_images[3]
    train_images[17] = test_images[8]
    train_bin, test_bin, manifest = _write_dataset(tmp_path, train_images, test_images)
    report_csv = tmp_path / "report.csv"
    valid_txt = tmp_path / "valid.txt"
    code = main(
        [
            "dedup",
            "--train", str(train_bin),
            "--test", str(test_bin),
            "--manifest", str(manifest),
            "--report", str(report_csv),
            "--valid-out", str(valid_txt),
            "--batch-size", "7",
        ]
    )
    assert code == 0
    assert report_csv.exists()
    assert len(report_csv.read_text().splitlines()) == 3  # header + 2 duplicates
    assert len(valid_txt.read_text().splitlines()) == 28
