"""On-disk artifact formats.

Images and sinograms are raw little-endian 32-bit floats, row-major, with
a plain-text ``.meta`` sidecar carrying dimensions, dtype, the config
hash, and the pipeline stage that produced the file.  PNG export exists
for human inspection only and is never read back for metrics.
"""

import hashlib
import os

import numpy as np


def config_hash(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def save_raw(array, path, stage, cfg_hash="", extra=None):
    array = np.ascontiguousarray(np.asarray(array, dtype="<f4"))
    with open(path, "wb") as fh:
        fh.write(array.tobytes())
    meta = {
        "shape": "x".join(str(s) for s in array.shape),
        "dtype": "<f4",
        "stage": stage,
        "config_hash": cfg_hash,
    }
    if extra:
        meta.update(extra)
    with open(path + ".meta", "w") as fh:
        for key, value in meta.items():
            fh.write(f"{key} = {value}\n")


def load_raw(path):
    meta = load_meta(path)
    shape = tuple(int(s) for s in meta["shape"].split("x"))
    data = np.fromfile(path, dtype=meta["dtype"]).reshape(shape)
    return data.astype(float), meta


def load_meta(path):
    meta = {}
    with open(path + ".meta") as fh:
        for line in fh:
            if "=" in line:
                key, value = line.split("=", 1)
                meta[key.strip()] = value.strip()
    return meta


def check_same_config(meta_a, meta_b):
    ha, hb = meta_a.get("config_hash", ""), meta_b.get("config_hash", "")
    if ha and hb and ha != hb:
        raise ValueError(
            f"artifacts come from different configs ({ha} vs {hb})"
        )


def export_png(array, path, window=None):
    """8-bit PNG with an explicit intensity window; inspection only."""
    from PIL import Image as PILImage

    array = np.asarray(array, dtype=float)
    if window is None:
        window = (float(array.min()), float(array.max()))
    lo, hi = window
    if hi <= lo:
        hi = lo + 1.0
    scaled = np.clip((array - lo) / (hi - lo), 0.0, 1.0)
    PILImage.fromarray((scaled * 255.0 + 0.5).astype(np.uint8)).save(path)
    return window


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
