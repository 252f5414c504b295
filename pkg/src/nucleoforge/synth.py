"""Synthetic nucleus layouts: random non-overlapping ellipses.

Desk-scale stand-in for real annotated tissue. Each image gets rotated
elliptical nuclei with random classes; the first two placements are
forced to the size extremes so every image spans at least a 10x area
ratio between its largest and smallest nucleus (the size-inverse
migration law is invisible on uniform sizes). Placement is rejection
sampling against an occupancy grid with a bounded retry budget — if
space runs out the image simply holds fewer nuclei and a warning is
logged.
"""

import logging
import os

import numpy as np

from . import io as nio
from .labelmap import InstanceLabelMap

log = logging.getLogger(__name__)

# distinct fill colors per class id (1-based), cycled if classes exceed it
PALETTE = np.array([
    [178, 102, 255],
    [102, 178, 255],
    [255, 153, 102],
    [102, 255, 178],
    [255, 102, 153],
    [204, 204, 102],
    [153, 102, 255],
    [102, 255, 255],
], dtype=np.uint8)

BACKGROUND_RGB = np.array([242, 233, 228], dtype=np.uint8)


def _ellipse_pixels(center, axes, angle, shape):
    """Integer pixels inside a rotated ellipse, clipped to the grid."""
    cr, cc = center
    a, b = axes
    reach = int(np.ceil(max(a, b))) + 1
    r0 = max(0, int(np.floor(cr)) - reach)
    r1 = min(shape[0], int(np.ceil(cr)) + reach + 1)
    c0 = max(0, int(np.floor(cc)) - reach)
    c1 = min(shape[1], int(np.ceil(cc)) + reach + 1)
    if r0 >= r1 or c0 >= c1:
        return np.zeros((0, 2), dtype=np.int64)
    rr, cc_grid = np.mgrid[r0:r1, c0:c1]
    dr = rr - cr
    dc = cc_grid - cc
    cos, sin = np.cos(angle), np.sin(angle)
    u = dr * cos + dc * sin
    v = -dr * sin + dc * cos
    inside = (u / a) ** 2 + (v / b) ** 2 <= 1.0
    return np.stack([rr[inside], cc_grid[inside]], axis=1)


def generate_label(shape, n_classes, density, rng, max_tries=40):
    """One random layout; returns (InstanceLabelMap, placed_count, target)."""
    h, w = shape
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1, got %d" % n_classes)
    if density <= 0:
        raise ValueError("density must be > 0, got %g" % density)
    target = max(2, int(round(density * h * w / 1000.0)))

    r_small = 1.5
    r_big = min(h, w) / 6.0
    if r_big < r_small * np.sqrt(10.0):
        r_big = r_small * np.sqrt(10.0)  # keep the 10x area span if possible

    inst = np.zeros((h, w), dtype=np.int32)
    cls = np.zeros((h, w), dtype=np.int32)
    occupied = np.zeros((h, w), dtype=bool)
    next_id = 1
    for k in range(target):
        placed = False
        for _ in range(max_tries):
            if k == 0:
                a = b = r_big
            elif k == 1:
                a = b = r_small
            else:
                a = rng.uniform(r_small, r_big)
                b = rng.uniform(r_small, r_big)
            angle = rng.uniform(0.0, np.pi)
            center = (rng.uniform(0, h - 1), rng.uniform(0, w - 1))
            pix = _ellipse_pixels(center, (a, b), angle, (h, w))
            if len(pix) == 0 or occupied[pix[:, 0], pix[:, 1]].any():
                continue
            class_id = int(rng.integers(1, n_classes + 1))
            inst[pix[:, 0], pix[:, 1]] = next_id
            cls[pix[:, 0], pix[:, 1]] = class_id
            occupied[pix[:, 0], pix[:, 1]] = True
            next_id += 1
            placed = True
            break
        if not placed and k < 2:
            # the size-extreme anchors get one relaxed retry round each
            for _ in range(max_tries):
                a = b = r_big if k == 0 else r_small
                center = (rng.uniform(0, h - 1), rng.uniform(0, w - 1))
                pix = _ellipse_pixels(center, (a * 0.8, b * 0.8), 0.0, (h, w))
                if len(pix) == 0 or occupied[pix[:, 0], pix[:, 1]].any():
                    continue
                class_id = int(rng.integers(1, n_classes + 1))
                inst[pix[:, 0], pix[:, 1]] = next_id
                cls[pix[:, 0], pix[:, 1]] = class_id
                occupied[pix[:, 0], pix[:, 1]] = True
                next_id += 1
                break
    placed_count = next_id - 1
    if placed_count < target:
        log.warning("placed %d of %d nuclei before running out of room",
                    placed_count, target)
    return InstanceLabelMap(inst, cls), placed_count, target


def render_image(label, rng):
    """Class-colored rendering with mild per-nucleus and pixel jitter."""
    h, w = label.shape
    img = np.empty((h, w, 3), dtype=np.float64)
    img[:] = BACKGROUND_RGB
    ids = np.unique(label.instance_ids)
    for ident in ids[ids != 0]:
        where = label.instance_ids == ident
        class_id = int(label.class_ids[where][0])
        color = PALETTE[(class_id - 1) % len(PALETTE)].astype(np.float64)
        shade = rng.uniform(0.75, 1.05)
        img[where] = color * shade
    img += rng.normal(0.0, 3.0, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def synth_one(out_dir, index, shape=(64, 64), n_classes=3, density=1.0,
              seed=0):
    """Generate and write image ``index``; returns its manifest entry.

    Draws from a generator seeded with (seed, index), so the result
    does not depend on which other images are built, in what order, or
    by which thread.
    """
    rng = np.random.default_rng([seed, index])
    label, _, _ = generate_label(shape, n_classes, density, rng)
    img = render_image(label, rng)
    stem = "img_%04d" % index
    nio.save_instance_png(os.path.join(out_dir, stem + "_inst.png"),
                          label.instance_ids)
    nio.save_class_png(os.path.join(out_dir, stem + "_class.png"),
                       label.class_ids)
    nio.save_rgb_png(os.path.join(out_dir, stem + ".png"), img)
    return {"image": stem + ".png",
            "instance_map": stem + "_inst.png",
            "class_map": stem + "_class.png"}


def synth_dataset(out_dir, n_images, shape=(64, 64), n_classes=3,
                  density=1.0, seed=0):
    """Write a manifest plus image/label PNGs; deterministic per seed.

    Returns the manifest path.
    """
    if n_images < 1:
        raise ValueError("n_images must be >= 1, got %d" % n_images)
    os.makedirs(out_dir, exist_ok=True)
    entries = [synth_one(out_dir, i, shape, n_classes, density, seed)
               for i in range(n_images)]
    manifest = os.path.join(out_dir, "manifest.json")
    nio.write_manifest(manifest, entries)
    return manifest
