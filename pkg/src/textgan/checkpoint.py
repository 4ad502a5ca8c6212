"""Language-neutral checkpoint directory format.

A checkpoint is a directory holding a UTF-8 ``manifest.txt`` of sorted
``key=value`` lines plus one ``<name>.f32`` file per named array. Each array
file is:

    8 bytes   little-endian uint64 element count
    4N bytes  little-endian float32 data
    4 bytes   little-endian uint32 CRC32 of the preceding header + data

The writer is fully deterministic, so saving, loading, and saving again
produces byte-identical files.
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

from .errors import ChecksumError, IncompatibleCheckpointError

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.txt"


def write_array(path: str, array: np.ndarray):
    data = np.ascontiguousarray(array, dtype="<f4").tobytes()
    header = struct.pack("<Q", len(data) // 4)
    crc = struct.pack("<I", zlib.crc32(header + data))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data)
        fh.write(crc)


def read_array(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12:
        raise ChecksumError(f"checksum-failure: {path} is truncated")
    (count,) = struct.unpack("<Q", blob[:8])
    if len(blob) != 8 + 4 * count + 4:
        raise ChecksumError(f"checksum-failure: {path} has wrong length for {count} floats")
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise ChecksumError(f"checksum-failure: CRC mismatch in {path}")
    return np.frombuffer(blob[8:-4], dtype="<f4").copy()


def save_checkpoint(path: str, arrays: dict[str, np.ndarray], manifest: dict[str, str]):
    """Write arrays and manifest into ``path`` (created if needed).

    Manifest values must be single-line strings; callers JSON-encode anything
    structured. The keys ``format_version`` and ``arrays`` are reserved.
    """
    os.makedirs(path, exist_ok=True)
    for key, value in manifest.items():
        if "\n" in str(value):
            raise ValueError(f"manifest value for {key!r} contains a newline")
    names = sorted(arrays)
    full = dict(manifest)
    full["format_version"] = str(FORMAT_VERSION)
    full["arrays"] = ",".join(names)
    lines = [f"{k}={full[k]}" for k in sorted(full)]
    with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    for name in names:
        write_array(os.path.join(path, name + ".f32"), arrays[name])


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise IncompatibleCheckpointError(
            f"incompatible-checkpoint: no {MANIFEST_NAME} in {path}"
        )
    manifest: dict[str, str] = {}
    with open(manifest_path, encoding="utf-8") as fh:
        for raw in fh.read().split("\n"):
            if not raw:
                continue
            key, sep, value = raw.partition("=")
            if not sep:
                raise ChecksumError(f"checksum-failure: malformed manifest line {raw!r}")
            manifest[key] = value
    version = manifest.get("format_version")
    if version != str(FORMAT_VERSION):
        raise IncompatibleCheckpointError(
            f"incompatible-checkpoint: format_version {version!r}, expected {FORMAT_VERSION}"
        )
    arrays: dict[str, np.ndarray] = {}
    listed = manifest.get("arrays", "")
    for name in listed.split(",") if listed else []:
        arrays[name] = read_array(os.path.join(path, name + ".f32"))
    return arrays, manifest
