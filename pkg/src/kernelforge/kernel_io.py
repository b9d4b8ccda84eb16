"""File formats: binary kernel files, matrix CSV, feature CSV, run manifests.

Binary kernel layout (little-endian throughout):
    magic "KGM1" | u32 m | m*m float64 entries, row-major | u32 name length | name utf-8
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .gram import GramMatrix, KernelBank, validate_features

MAGIC = b"KGM1"
MANIFEST_SCHEMA = "kf-manifest-1"


def write_kernel(path, gram: GramMatrix) -> None:
    path = Path(path)
    name = gram.source_tag.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", gram.size))
        fh.write(np.ascontiguousarray(gram.values, dtype="<f8").tobytes())
        fh.write(struct.pack("<I", len(name)))
        fh.write(name)


def read_kernel(path) -> GramMatrix:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise DataError(f"{path}: not a kernel file (bad magic {blob[:4]!r})")
    (m,) = struct.unpack_from("<I", blob, 4)
    body = 8 + 8 * m * m
    if len(blob) < body + 4:
        raise DataError(f"{path}: truncated kernel file")
    values = np.frombuffer(blob, dtype="<f8", count=m * m, offset=8).reshape(m, m)
    (name_len,) = struct.unpack_from("<I", blob, body)
    name = blob[body + 4 : body + 4 + name_len].decode("utf-8")
    return GramMatrix(values, name)


def write_kernel_csv(path, gram: GramMatrix) -> None:
    """Headerless CSV export of the raw matrix (name is not preserved)."""
    np.savetxt(path, gram.values, delimiter=",", fmt="%.17g")


def read_kernel_csv(path, name: str = "") -> GramMatrix:
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    return GramMatrix(values, name)


def load_feature_csv(path, header: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Feature CSV: one row per item, last column = integer class label."""
    path = Path(path)
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: could not parse feature CSV: {exc}") from exc
    if table.shape[1] < 2:
        raise DataError(f"{path}: need at least one feature column plus a label column")
    features = table[:, :-1]
    raw_labels = table[:, -1]
    if not np.all(np.isfinite(raw_labels)) or np.any(raw_labels != np.round(raw_labels)):
        raise DataError(f"{path}: last column must hold integer class labels")
    validate_features(features)
    return features, raw_labels.astype(int)


def save_feature_csv(path, features, labels, header: list[str] | None = None) -> None:
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(",".join(header) + "\n")
        for row, label in zip(features, labels):
            cells = [repr(float(v)) for v in row] + [str(int(label))]
            fh.write(",".join(cells) + "\n")


def load_labels_csv(path) -> np.ndarray:
    """One integer class label per line."""
    raw = np.loadtxt(path, dtype=float, ndmin=1)
    if np.any(raw != np.round(raw)):
        raise DataError(f"{path}: labels must be integers")
    return raw.astype(int)


def save_labels_csv(path, labels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label in np.asarray(labels, dtype=int):
            fh.write(f"{int(label)}\n")


def write_manifest(path, m: int, kernel_entries: list[dict], labels_file: str) -> None:
    """kernel_entries: [{"name": ..., "file": ..., "gamma": ...}, ...]; paths relative to the manifest."""
    doc = {
        "schema": MANIFEST_SCHEMA,
        "m": int(m),
        "kernels": kernel_entries,
        "labels_file": labels_file,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid manifest JSON: {exc}") from exc
    if doc.get("schema") != MANIFEST_SCHEMA:
        raise DataError(f"{path}: unknown manifest schema {doc.get('schema')!r}")
    for key in ("m", "kernels", "labels_file"):
        if key not in doc:
            raise DataError(f"{path}: manifest missing key {key!r}")
    return doc


def load_bank_from_manifest(path) -> tuple[KernelBank, np.ndarray, dict]:
    """Read the manifest plus every kernel and the label file it points at."""
    path = Path(path)
    doc = read_manifest(path)
    base = path.parent
    kernels, names = [], []
    for entry in doc["kernels"]:
        k = read_kernel(base / entry["file"])
        if k.size != doc["m"]:
            raise DataError(f"{entry['file']}: size {k.size} disagrees with manifest m={doc['m']}")
        kernels.append(k)
        names.append(entry["name"])
    labels = load_labels_csv(base / doc["labels_file"])
    if labels.shape[0] != doc["m"]:
        raise DataError(f"{doc['labels_file']}: {labels.shape[0]} labels for m={doc['m']} items")
    return KernelBank(tuple(kernels), tuple(names)), labels, doc
