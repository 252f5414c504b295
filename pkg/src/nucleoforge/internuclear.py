"""Contact-region extraction between nuclei.

Every nucleus front grows synchronously into the background (8-neighbor
rings, one ring per iteration). Where fronts meet — a pixel reached by
two fronts in the same ring, or two same-ring pixels of different owners
touching diagonally/orthogonally — the pixels involved are recorded as
contact pixels for every instance at the meeting. The union of all
contact pixels, padded by a few extra dilations, is the binary
internuclear mask that later restricts where inpainting may act.

Two interchangeable growth kernels exist: a compiled one and a plain
NumPy/Python one. The compiled kernel is preferred when the extension
built; set ``NUCLEOFORGE_KERNEL=python`` to force the fallback. Both
produce bit-identical results (a test asserts this).
"""

import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .labelmap import InstanceLabelMap

from . import _growth_py

if os.environ.get("NUCLEOFORGE_KERNEL", "").lower() == "python":
    _kernel = _growth_py
    GROWTH_BACKEND = "python"
else:
    try:
        from . import _growth as _kernel

        GROWTH_BACKEND = "compiled"
    except ImportError:
        _kernel = _growth_py
        GROWTH_BACKEND = "python"

DEFAULT_MAX_ITERS = 10
DEFAULT_HALO_ITERS = 2

_BOX3 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class InternuclearMask:
    """Per-instance contact pixels plus the dilated overall mask.

    contact_sets maps every instance ID to a (possibly empty) set of
    (row, col) tuples; mask is a uint8 grid where 1 marks the halo-
    dilated union of all contact pixels.
    """

    contact_sets: dict
    mask: np.ndarray
    halo_iters: int

    def union_pixels(self):
        """All contact pixels across instances as an (N, 2) int array."""
        seen = set()
        for pixels in self.contact_sets.values():
            seen.update(pixels)
        if not seen:
            return np.zeros((0, 2), dtype=np.int32)
        return np.array(sorted(seen), dtype=np.int32)


def constrained_dilate(label, max_iters=DEFAULT_MAX_ITERS):
    """Grow all nuclei until fronts meet; return per-instance contact sets.

    Returns a dict keyed by every instance ID in ``label``; values are
    sets of (row, col) pixels where that instance's front met another.
    Contact pixels are always background pixels of the input (growth
    never enters nuclei), and contact is symmetric: a meeting at p puts
    p into the sets of all instances involved.
    """
    if not isinstance(label, InstanceLabelMap):
        raise TypeError("label must be an InstanceLabelMap")
    max_iters = int(max_iters)
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1, got %d" % max_iters)

    ids_present = np.unique(label.instance_ids)
    ids_present = ids_present[ids_present != 0]
    contact_sets = {int(i): set() for i in ids_present}
    if len(ids_present) < 2:
        return contact_sets

    _, ids, rows, cols = _kernel.grow(label.instance_ids, max_iters)
    if len(ids):
        triples = np.unique(
            np.stack([np.asarray(ids), np.asarray(rows), np.asarray(cols)], axis=1),
            axis=0,
        )
        for ident, r, c in triples:
            contact_sets[int(ident)].add((int(r), int(c)))
    return contact_sets


def internuclear_mask(label, halo_iters=DEFAULT_HALO_ITERS,
                      max_iters=DEFAULT_MAX_ITERS):
    """Contact sets plus their halo-dilated union as a binary mask."""
    halo_iters = int(halo_iters)
    if halo_iters < 0:
        raise ValueError("halo_iters must be >= 0, got %d" % halo_iters)
    contact_sets = constrained_dilate(label, max_iters=max_iters)

    mask = np.zeros(label.shape, dtype=bool)
    for pixels in contact_sets.values():
        for r, c in pixels:
            mask[r, c] = True
    if halo_iters > 0 and mask.any():
        mask = ndimage.binary_dilation(mask, structure=_BOX3,
                                       iterations=halo_iters)
    return InternuclearMask(contact_sets=contact_sets,
                            mask=mask.astype(np.uint8),
                            halo_iters=halo_iters)


def growth_depth(label, max_iters=DEFAULT_MAX_ITERS):
    """Ring index at which each background pixel was claimed.

    0 marks nucleus pixels, -1 pixels never reached within max_iters;
    background pixels carry 1..max_iters. Mostly a debugging/plotting
    aid, but also handy for sanity-checking kernel agreement.
    """
    depth, _, _, _ = _kernel.grow(label.instance_ids, int(max_iters))
    return depth
