"""Pure-Python contact-growth kernel.

Reference implementation of the synchronous multi-source growth used to
find internuclear contact regions. The compiled kernel in ``_growth.pyx``
implements the identical algorithm; both produce bit-identical outputs
(the result is a deterministic function of the label map, independent of
propagation order). This module is the import-time fallback when the
extension is unavailable, and the baseline for the kernel benchmark.

Algorithm: every instance grows over background, one 8-neighborhood ring
per iteration. A background pixel is claimed at the iteration its first
front arrives; fronts from other instances arriving in the same iteration
are recorded as co-claims and keep propagating. Contact pixels are
  * co-claimed pixels (>= 2 instances arrive in the same iteration), and
  * 8-adjacent pairs of same-depth pixels whose claim sets are not the
    same single instance,
each joining the contact sets of every instance involved.
"""

from __future__ import annotations

import numpy as np

NBRS8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
# one direction per unordered adjacent pair
FWD4 = ((0, 1), (1, -1), (1, 0), (1, 1))


def grow(inst: np.ndarray, max_iters: int):
    """Run the growth and return (depth, contact id/row/col triples).

    ``depth`` is -1 on unreached background, 0 on instance pixels, and
    the claim iteration (1..max_iters) on grown pixels. The triples may
    contain duplicates; callers deduplicate.
    """
    inst = np.ascontiguousarray(inst, dtype=np.int32)
    h, w = inst.shape
    depth = np.where(inst > 0, 0, -1).astype(np.int32)
    claims: dict[tuple[int, int], list[int]] = {}

    rows, cols = np.nonzero(inst)
    frontier = [(int(r), int(c), int(inst[r, c])) for r, c in zip(rows, cols)]

    for it in range(1, max_iters + 1):
        new_frontier = []
        for r, c, ident in frontier:
            for dr, dc in NBRS8:
                nr, nc = r + dr, c + dc
                if nr < 0 or nr >= h or nc < 0 or nc >= w:
                    continue
                if inst[nr, nc] != 0:
                    continue
                d = depth[nr, nc]
                if d == -1:
                    depth[nr, nc] = it
                    claims[(nr, nc)] = [ident]
                    new_frontier.append((nr, nc, ident))
                elif d == it:
                    lst = claims[(nr, nc)]
                    if ident not in lst:
                        lst.append(ident)
                        new_frontier.append((nr, nc, ident))
        frontier = new_frontier
        if not frontier:
            break

    ids: list[int] = []
    crows: list[int] = []
    ccols: list[int] = []

    def emit(ident, r, c):
        ids.append(ident)
        crows.append(r)
        ccols.append(c)

    for (r, c), lst in claims.items():
        if len(lst) >= 2:
            for ident in lst:
                emit(ident, r, c)
        d = depth[r, c]
        for dr, dc in FWD4:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            if depth[nr, nc] != d:
                continue
            other = claims.get((nr, nc))
            if other is None:
                continue
            if len(lst) == 1 and len(other) == 1 and lst[0] == other[0]:
                continue
            for ident in set(lst) | set(other):
                emit(ident, r, c)
                emit(ident, nr, nc)

    return (
        depth,
        np.asarray(ids, dtype=np.int32),
        np.asarray(crows, dtype=np.int32),
        np.asarray(ccols, dtype=np.int32),
    )
