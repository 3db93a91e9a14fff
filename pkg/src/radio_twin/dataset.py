"""On-disk dataset format.

Layout::

    <root>/manifest.json
    <root>/<subject_id>/radio.f32    frames x n_subcarriers x 2 (re, im), float32 LE
    <root>/<subject_id>/ppg.f32      samples, float32 LE
    <root>/<subject_id>/vitals.f32   records x 4 (timestamp, hr, spo2, rr), float32 LE

The manifest is the single source of shape truth; every blob is checked
against its declared size and sha256 on load. Real recordings can be
imported by writing blobs in this layout together with a manifest.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .physio import PpgRecording, RadioRecording, VitalsRecord

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
_LE_F32 = np.dtype("<f4")


class IntegrityError(Exception):
    """Dataset files disagree with their manifest."""


class UnsupportedVersionError(IntegrityError):
    pass


@dataclass
class SubjectData:
    subject_id: str
    radio: RadioRecording
    ppg: PpgRecording
    vitals: VitalsRecord
    meta: dict = field(default_factory=dict)


@dataclass
class Dataset:
    root: Path
    subjects: list[SubjectData]
    extra: dict = field(default_factory=dict)

    def subject_ids(self) -> list[str]:
        return [s.subject_id for s in self.subjects]

    def __getitem__(self, subject_id: str) -> SubjectData:
        for s in self.subjects:
            if s.subject_id == subject_id:
                return s
        raise KeyError(subject_id)


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _sha256(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def _radio_bytes(radio: RadioRecording) -> bytes:
    inter = np.empty(radio.cfr.shape + (2,), dtype=_LE_F32)
    inter[..., 0] = radio.cfr.real
    inter[..., 1] = radio.cfr.imag
    return inter.tobytes()


def _vitals_bytes(v: VitalsRecord) -> bytes:
    return np.stack([v.timestamp, v.hr, v.spo2, v.rr], axis=1).astype(_LE_F32).tobytes()


def write_dataset(root, subjects, extra: dict | None = None) -> Path:
    """Write subjects (objects with profile/subject_id, radio, ppg, vitals, meta)."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in subjects:
        sid = getattr(s, "subject_id", None) or s.profile.subject_id
        blobs = {
            "radio": _radio_bytes(s.radio),
            "ppg": s.ppg.samples.astype(_LE_F32).tobytes(),
            "vitals": _vitals_bytes(s.vitals),
        }
        for name, payload in blobs.items():
            atomic_write_bytes(root / sid / f"{name}.f32", payload)
        entries.append({
            "subject_id": sid,
            "radio": {"file": f"{sid}/radio.f32", "frames": int(s.radio.n_frames),
                      "n_subcarriers": int(s.radio.cfr.shape[1]), "rate_hz": float(s.radio.rate),
                      "sha256": _sha256(blobs["radio"])},
            "ppg": {"file": f"{sid}/ppg.f32", "samples": int(s.ppg.samples.size),
                    "rate_hz": float(s.ppg.rate), "sha256": _sha256(blobs["ppg"])},
            "vitals": {"file": f"{sid}/vitals.f32", "records": len(s.vitals),
                       "sha256": _sha256(blobs["vitals"])},
            "meta": getattr(s, "meta", {}) or {},
        })
    manifest = {"format_version": FORMAT_VERSION, "subjects": entries, "extra": extra or {}}
    atomic_write_text(root / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return root


def _read_blob(root: Path, spec: dict, expected_floats: int) -> np.ndarray:
    path = root / spec["file"]
    if not path.is_file():
        raise IntegrityError(f"{spec['file']}: missing")
    payload = path.read_bytes()
    expected = expected_floats * _LE_F32.itemsize
    if len(payload) != expected:
        raise IntegrityError(f"{spec['file']}: expected {expected} bytes, found {len(payload)}")
    if "sha256" in spec and _sha256(payload) != spec["sha256"]:
        raise IntegrityError(f"{spec['file']}: checksum mismatch")
    return np.frombuffer(payload, dtype=_LE_F32)


def read_manifest(root) -> dict:
    path = Path(root) / MANIFEST
    if not path.is_file():
        raise IntegrityError(f"{path}: manifest not found")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"{path}: unreadable manifest ({exc})") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"dataset format_version {version!r} unsupported (this build reads {FORMAT_VERSION})")
    return manifest


def load_dataset(root) -> Dataset:
    root = Path(root)
    manifest = read_manifest(root)
    subjects = []
    for e in manifest["subjects"]:
        r = e["radio"]
        frames, nsc = int(r["frames"]), int(r["n_subcarriers"])
        raw = _read_blob(root, r, frames * nsc * 2).reshape(frames, nsc, 2)
        radio = RadioRecording(cfr=raw[..., 0].astype(np.float64) + 1j * raw[..., 1].astype(np.float64),
                               rate=float(r["rate_hz"]), subject_id=e["subject_id"])
        p = e["ppg"]
        ppg = PpgRecording(samples=_read_blob(root, p, int(p["samples"])).astype(np.float64),
                           rate=float(p["rate_hz"]))
        v = e["vitals"]
        vit = _read_blob(root, v, int(v["records"]) * 4).reshape(-1, 4).astype(np.float64)
        vitals = VitalsRecord(timestamp=vit[:, 0], hr=vit[:, 1], spo2=vit[:, 2], rr=vit[:, 3])
        subjects.append(SubjectData(e["subject_id"], radio, ppg, vitals, e.get("meta", {})))
    return Dataset(root=root, subjects=subjects, extra=manifest.get("extra", {}))
