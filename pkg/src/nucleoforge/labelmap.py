"""Instance/class label maps and derived label products.

The central data structure is :class:`InstanceLabelMap`: a pair of 2-D
integer grids assigning each pixel an instance ID and a class ID
(0 = background in both). Everything downstream — migration planning,
contact-region growth, structural labels for the inpainting conditioner —
consumes instances extracted from such maps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def _as_int_grid(arr, name: str) -> np.ndarray:
    out = np.asarray(arr)
    if out.ndim != 2:
        raise ValueError(f"{name} must be a 2-D grid, got shape {out.shape}")
    if not np.issubdtype(out.dtype, np.integer):
        raise ValueError(f"{name} must be integer-typed, got {out.dtype}")
    if out.size and out.min() < 0:
        raise ValueError(f"{name} must be non-negative")
    return np.ascontiguousarray(out, dtype=np.int32)


@dataclass(frozen=True)
class InstanceLabelMap:
    """Per-pixel instance IDs paired with per-pixel class IDs.

    Invariants (checked on construction):
      * both grids share one shape;
      * every pixel with a nonzero instance ID has a nonzero class ID;
      * all pixels of one instance carry the same class ID.

    Instance IDs need not be contiguous, and an instance need not be a
    connected region — identity is shared ID, nothing more.
    """

    instance_ids: np.ndarray
    class_ids: np.ndarray

    def __post_init__(self):
        inst = _as_int_grid(self.instance_ids, "instance_ids")
        cls = _as_int_grid(self.class_ids, "class_ids")
        object.__setattr__(self, "instance_ids", inst)
        object.__setattr__(self, "class_ids", cls)
        validate_label_pair(inst, cls)

    @property
    def height(self) -> int:
        return self.instance_ids.shape[0]

    @property
    def width(self) -> int:
        return self.instance_ids.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.instance_ids.shape


def validate_label_pair(inst: np.ndarray, cls: np.ndarray) -> None:
    """Raise ValueError if (inst, cls) violate the label-map invariants."""
    if inst.shape != cls.shape:
        raise ValueError(
            f"instance grid {inst.shape} and class grid {cls.shape} differ in shape"
        )
    fg = inst > 0
    if np.any(cls[fg] == 0):
        bad = int(inst[fg][cls[fg] == 0][0])
        raise ValueError(f"instance {bad} has background class on some of its pixels")
    if np.any(cls[~fg] != 0):
        raise ValueError("class labels present on background pixels")
    if fg.any():
        pairs = np.unique(np.stack([inst[fg], cls[fg]]), axis=1)
        ids, counts = np.unique(pairs[0], return_counts=True)
        if np.any(counts > 1):
            bad_id = int(ids[counts > 1][0])
            bad_classes = sorted(int(c) for c in pairs[1][pairs[0] == bad_id])
            raise ValueError(
                f"instance {bad_id} spans multiple classes {bad_classes}"
            )


@dataclass(frozen=True)
class Nucleus:
    """One extracted instance.

    ``pixels`` is an (area, 2) int array of (row, col) coordinates in
    row-major scan order. ``bbox`` is (rmin, rmax, cmin, cmax) with
    exclusive maxima.
    """

    id: int
    class_id: int
    pixels: np.ndarray

    @property
    def area(self) -> int:
        return self.pixels.shape[0]

    @property
    def centroid(self) -> tuple[float, float]:
        r, c = self.pixels.mean(axis=0)
        return float(r), float(c)

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        rmin, cmin = self.pixels.min(axis=0)
        rmax, cmax = self.pixels.max(axis=0)
        return int(rmin), int(rmax) + 1, int(cmin), int(cmax) + 1


def extract_instances(label: InstanceLabelMap) -> list[Nucleus]:
    """Pull every instance out of a label map, ordered by instance ID.

    The union of the returned pixel sets is exactly the set of nonzero
    instance pixels; an inconsistent class assignment inside a single
    instance ID is rejected with a diagnostic naming the ID.
    """
    inst = label.instance_ids
    cls = label.class_ids
    validate_label_pair(inst, cls)

    rows, cols = np.nonzero(inst)
    if rows.size == 0:
        return []
    ids = inst[rows, cols]
    order = np.argsort(ids, kind="stable")
    rows, cols, ids = rows[order], cols[order], ids[order]
    uniq, starts = np.unique(ids, return_index=True)
    bounds = np.append(starts, ids.size)

    nuclei = []
    for k, inst_id in enumerate(uniq):
        sl = slice(bounds[k], bounds[k + 1])
        coords = np.column_stack([rows[sl], cols[sl]]).astype(np.int32)
        class_id = int(cls[coords[0, 0], coords[0, 1]])
        nuclei.append(Nucleus(id=int(inst_id), class_id=class_id, pixels=coords))
    return nuclei


def compose_label(
    nuclei: Sequence[Nucleus],
    offsets: Sequence[tuple[int, int]],
    shape: tuple[int, int],
    priority: Callable[[Nucleus], object],
) -> InstanceLabelMap:
    """Rasterize translated nuclei onto a fresh canvas.

    Each nucleus is shifted by its (drow, dcol) offset; pixels landing
    outside ``shape`` are clipped. Overlaps are resolved by painting in
    ascending ``priority(nucleus)`` order, so the nucleus with the
    largest key wins contested pixels. A nucleus whose translated pixels
    are all out of bounds is dropped with a warning, not an error.
    """
    if len(nuclei) != len(offsets):
        raise ValueError(
            f"{len(nuclei)} nuclei but {len(offsets)} offsets"
        )
    h, w = shape
    inst_out = np.zeros((h, w), dtype=np.int32)
    cls_out = np.zeros((h, w), dtype=np.int32)

    order = sorted(range(len(nuclei)), key=lambda i: priority(nuclei[i]))
    dropped = []
    for i in order:
        nuc = nuclei[i]
        drow, dcol = offsets[i]
        rr = nuc.pixels[:, 0] + int(drow)
        cc = nuc.pixels[:, 1] + int(dcol)
        keep = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        if not keep.any():
            dropped.append(nuc.id)
            continue
        inst_out[rr[keep], cc[keep]] = nuc.id
        cls_out[rr[keep], cc[keep]] = nuc.class_id
    if dropped:
        logger.warning(
            "dropped %d nuclei translated fully out of bounds: %s",
            len(dropped), dropped,
        )
    return InstanceLabelMap(instance_ids=inst_out, class_ids=cls_out)


@dataclass(frozen=True)
class StructuralLabel:
    """Semantic map plus per-instance normalized offset-to-centroid maps.

    ``hdist``/``vdist`` are zero on background; inside an instance they
    hold the horizontal/vertical offset from the instance centroid,
    normalized by the instance's own maximum absolute offset along the
    same axis, clamped to [-1, 1].
    """

    sem: np.ndarray
    hdist: np.ndarray
    vdist: np.ndarray


def compute_structural_label(label: InstanceLabelMap) -> StructuralLabel:
    """Derive the structure-aware conditioning label from an instance map."""
    hdist = np.zeros(label.shape, dtype=np.float32)
    vdist = np.zeros(label.shape, dtype=np.float32)
    for nuc in extract_instances(label):
        r = nuc.pixels[:, 0].astype(np.float64)
        c = nuc.pixels[:, 1].astype(np.float64)
        cr, cc = r.mean(), c.mean()
        dr = r - cr
        dc = c - cc
        rnorm = max(1.0, np.abs(dr).max())
        cnorm = max(1.0, np.abs(dc).max())
        vdist[nuc.pixels[:, 0], nuc.pixels[:, 1]] = np.clip(dr / rnorm, -1.0, 1.0)
        hdist[nuc.pixels[:, 0], nuc.pixels[:, 1]] = np.clip(dc / cnorm, -1.0, 1.0)
    return StructuralLabel(sem=label.class_ids.copy(), hdist=hdist, vdist=vdist)


@dataclass(frozen=True)
class Patch:
    """One sliding-window crop: where it came from and the cropped payload."""

    origin: tuple[int, int]
    size: int
    payload: object = field(repr=False)


def _axis_origins(dim: int, size: int, stride: int) -> list[int]:
    origins = list(range(0, dim - size + 1, stride))
    last = dim - size
    if origins[-1] != last:
        origins.append(last)
    return origins


def extract_patches(source, size: int, stride: int) -> list[Patch]:
    """Tile a label map or image array with square sliding windows.

    Window origins step by ``stride``; the final row/column origin is
    clamped to ``dim - size`` so the border is covered exactly once.
    Accepts an :class:`InstanceLabelMap` (payload: cropped map) or an
    ndarray of shape (H, W) or (H, W, C) (payload: cropped view copy).
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if isinstance(source, InstanceLabelMap):
        h, w = source.shape
        crop = lambda r, c: InstanceLabelMap(
            instance_ids=source.instance_ids[r:r + size, c:c + size].copy(),
            class_ids=source.class_ids[r:r + size, c:c + size].copy(),
        )
    else:
        arr = np.asarray(source)
        if arr.ndim not in (2, 3):
            raise ValueError(f"expected 2-D or 3-D array, got shape {arr.shape}")
        h, w = arr.shape[:2]
        crop = lambda r, c: arr[r:r + size, c:c + size].copy()
    if size > min(h, w):
        raise ValueError(f"patch size {size} exceeds source dimensions ({h}, {w})")

    patches = []
    for r in _axis_origins(h, size, stride):
        for c in _axis_origins(w, size, stride):
            patches.append(Patch(origin=(r, c), size=size, payload=crop(r, c)))
    return patches
