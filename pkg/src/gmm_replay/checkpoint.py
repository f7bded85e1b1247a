"""Checkpoint container: one JSON header line followed by
length-prefixed little-endian float32 arrays. Round-trips bit-exactly.
"""

import json
import struct

import numpy as np

from gmm_replay.errors import CheckpointError

FORMAT_VERSION = 1


def write_arrays(path, header, arrays):
    """Write a header dict plus named float32 arrays.

    The header is extended with the format version and, per array, its
    name and shape so loading can restore layouts exactly.
    """
    header = dict(header)
    header["format_version"] = FORMAT_VERSION
    header["arrays"] = [{"name": n, "shape": list(a.shape)} for n, a in arrays]
    with open(path, "wb") as f:
        f.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        for _, arr in arrays:
            flat = np.ascontiguousarray(arr, dtype="<f4").ravel()
            f.write(struct.pack("<I", flat.size))
            f.write(flat.tobytes())


def read_arrays(path):
    """Read (header, {name: float32 array}) from a checkpoint file."""
    with open(path, "rb") as f:
        line = f.readline()
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: bad header: {exc}") from exc
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported version {header.get('format_version')}")
        arrays = {}
        for meta in header["arrays"]:
            raw = f.read(4)
            if len(raw) < 4:
                raise CheckpointError(f"{path}: truncated at array {meta['name']}")
            (count,) = struct.unpack("<I", raw)
            data = f.read(4 * count)
            if len(data) < 4 * count:
                raise CheckpointError(f"{path}: truncated payload for {meta['name']}")
            arrays[meta["name"]] = np.frombuffer(data, dtype="<f4").reshape(meta["shape"]).copy()
    return header, arrays
