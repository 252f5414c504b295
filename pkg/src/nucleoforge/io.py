"""File formats: 16-bit/8-bit PNG label maps, float32 NPY grids, manifests.

Instance maps go to 16-bit grayscale PNG (IDs up to 65535), class maps
and binary masks to 8-bit PNG, photographs to RGB PNG, and real-valued
grids (distance maps, tensors) to NPY float32. A dataset manifest is a
JSON array of {"image", "instance_map", "class_map"} entries whose
paths are relative to the manifest's own directory; "image" may be
null for label-only datasets.
"""

import json
import os

import numpy as np
from PIL import Image

from .labelmap import InstanceLabelMap

MANIFEST_KEYS = ("image", "instance_map", "class_map")


def save_instance_png(path, arr):
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError("instance map must be 2-D")
    if arr.min() < 0 or arr.max() > 65535:
        raise ValueError("instance ids must fit in uint16, got range [%d, %d]"
                         % (arr.min(), arr.max()))
    Image.fromarray(arr.astype(np.uint16)).save(path)


def load_instance_png(path):
    arr = np.asarray(Image.open(path), dtype=np.int64)
    if arr.ndim != 2:
        raise ValueError("%s: expected single-channel image" % path)
    if arr.min() < 0 or arr.max() > 65535:
        raise ValueError("%s: values out of uint16 range" % path)
    return arr.astype(np.int32)


def save_class_png(path, arr):
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError("class map must be 2-D")
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("class ids must fit in uint8, got range [%d, %d]"
                         % (arr.min(), arr.max()))
    Image.fromarray(arr.astype(np.uint8)).save(path)


def load_class_png(path):
    arr = np.asarray(Image.open(path), dtype=np.int64)
    if arr.ndim != 2:
        raise ValueError("%s: expected single-channel image" % path)
    return arr.astype(np.int32)


def save_mask_png(path, mask):
    """Binary mask as 0/255 8-bit PNG."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    Image.fromarray(np.where(mask != 0, 255, 0).astype(np.uint8)).save(path)


def load_mask_png(path):
    """Read a 0/255 mask PNG back to a 0/1 uint8 grid."""
    arr = np.asarray(Image.open(path))
    if arr.ndim != 2:
        raise ValueError("%s: expected single-channel image" % path)
    return (arr != 0).astype(np.uint8)


def save_rgb_png(path, arr):
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("expected (H, W, 3) array, got shape %s"
                         % (arr.shape,))
    Image.fromarray(arr.astype(np.uint8), mode="RGB").save(path)


def load_rgb_png(path):
    img = Image.open(path)
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def save_float_npy(path, arr):
    np.save(path, np.ascontiguousarray(arr, dtype=np.float32))


def load_float_npy(path):
    return np.load(path).astype(np.float32)


def write_manifest(path, entries):
    """Write dataset entries; paths inside must already be relative."""
    cleaned = []
    for e in entries:
        missing = [k for k in MANIFEST_KEYS if k not in e]
        if missing:
            raise ValueError("manifest entry missing keys %s: %r"
                             % (missing, e))
        cleaned.append({k: e[k] for k in MANIFEST_KEYS})
    with open(path, "w") as fh:
        json.dump(cleaned, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path):
    with open(path) as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise ValueError("%s: manifest must be a JSON array" % path)
    for e in entries:
        missing = [k for k in MANIFEST_KEYS if k not in e]
        if missing:
            raise ValueError("%s: entry missing keys %s" % (path, missing))
    return entries


def load_entry_label(manifest_path, entry):
    """Read one manifest entry's label pair as an InstanceLabelMap."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    inst = load_instance_png(os.path.join(base, entry["instance_map"]))
    cls = load_class_png(os.path.join(base, entry["class_map"]))
    return InstanceLabelMap(inst, cls)


def load_entry_image(manifest_path, entry):
    """Read one entry's RGB image, or None when the entry has no image."""
    if not entry.get("image"):
        return None
    base = os.path.dirname(os.path.abspath(manifest_path))
    return load_rgb_png(os.path.join(base, entry["image"]))


def image_to_unit(img):
    """uint8 (H, W, 3) image -> float64 (3, H, W) scaled to [-1, 1]."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("expected (H, W, 3) image, got shape %s"
                         % (arr.shape,))
    return arr.transpose(2, 0, 1) / 127.5 - 1.0


def unit_to_image(x):
    """float (3, H, W) in [-1, 1] -> uint8 (H, W, 3), clipped."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != 3:
        raise ValueError("expected (3, H, W) tensor, got shape %s"
                         % (x.shape,))
    arr = np.clip((x + 1.0) * 127.5, 0.0, 255.0)
    return np.rint(arr).astype(np.uint8).transpose(1, 2, 0)
