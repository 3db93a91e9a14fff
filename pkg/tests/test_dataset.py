import json

import numpy as np
import pytest

from radio_twin.dataset import IntegrityError, UnsupportedVersionError, load_dataset, write_dataset
from radio_twin.physio import generate_cohort, simulate_subject


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_cohort_layout(tmp_path):
    root = generate_cohort(tmp_path / "a", 2, 12.0, seed=7)
    ds = load_dataset(root)
    assert ds.subject_ids() == ["S01", "S02"]
    s = ds["S01"]
    assert s.radio.cfr.shape == (3000, 64)
    assert s.ppg.samples.size == 2400
    assert len(s.vitals) == 12
    again = generate_cohort(tmp_path / "b", 2, 12.0, seed=7)
    assert tree_bytes(root) == tree_bytes(again)
    with pytest.raises(ValueError):
        generate_cohort(tmp_path / "c", 1, 12.0, seed=7)


def test_round_trip_bit_exact(tmp_path):
    sub = simulate_subject(0, 6.0, seed=1)
    write_dataset(tmp_path, [sub])
    s = load_dataset(tmp_path).subjects[0]
    assert np.array_equal(s.radio.cfr, sub.radio.cfr.astype(np.complex64).astype(np.complex128))
    assert np.array_equal(s.ppg.samples, sub.ppg.samples.astype(np.float32).astype(float))
    assert np.array_equal(s.vitals.hr, sub.vitals.hr.astype(np.float32).astype(float))


def test_truncated_blob(tmp_path):
    write_dataset(tmp_path, [simulate_subject(0, 4.0, seed=1)])
    blob = tmp_path / "S01" / "radio.f32"
    blob.write_bytes(blob.read_bytes()[:-8])
    with pytest.raises(IntegrityError, match="radio.f32.*expected 512000 bytes, found 511992"):
        load_dataset(tmp_path)


def test_corrupted_blob(tmp_path):
    write_dataset(tmp_path, [simulate_subject(0, 4.0, seed=1)])
    blob = tmp_path / "S01" / "ppg.f32"
    raw = bytearray(blob.read_bytes())
    raw[0] ^= 0xFF
    blob.write_bytes(bytes(raw))
    with pytest.raises(IntegrityError, match="checksum"):
        load_dataset(tmp_path)


def test_unknown_version(tmp_path):
    write_dataset(tmp_path, [simulate_subject(0, 4.0, seed=1)])
    m = json.loads((tmp_path / "manifest.json").read_text())
    m["format_version"] = 99
    (tmp_path / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(UnsupportedVersionError, match="99"):
        load_dataset(tmp_path)


def test_missing_manifest(tmp_path):
    with pytest.raises(IntegrityError):
        load_dataset(tmp_path)
