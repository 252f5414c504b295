"""Size-dependent nuclear migration.

Every nucleus in an image shifts along one shared random direction, with
a displacement magnitude inversely proportional to its pixel area:

    displacement_i = shared_distance * ref_area / area_i

so small nuclei travel far and large nuclei barely move. Overlaps
created by the shift are resolved by dynamic z-ordering that keeps
smaller nuclei on top, so no small nucleus is ever hidden underneath a
larger one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .labelmap import InstanceLabelMap, Nucleus, compose_label, extract_instances


def round_half_away_from_zero(x):
    """Componentwise rounding with halves moving away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def migration_priority(nucleus: Nucleus):
    """Sort key for overlap resolution: smaller area on top, ties to lower ID."""
    return (-nucleus.area, -nucleus.id)


@dataclass(frozen=True)
class PlanEntry:
    nucleus_id: int
    displacement: float
    offset: tuple[int, int]


@dataclass(frozen=True)
class MigrationPlan:
    """Shared direction/distance plus the per-nucleus integer offsets.

    ``direction`` is a unit (drow, dcol) vector; ``displacement`` in each
    entry is the real-valued magnitude before rounding; ``offset`` is the
    rounded (drow, dcol) translation actually applied.
    """

    direction: tuple[float, float]
    shared_distance: float
    ref_area: float
    per_nucleus: tuple[PlanEntry, ...]

    def offsets_by_id(self) -> dict[int, tuple[int, int]]:
        return {e.nucleus_id: e.offset for e in self.per_nucleus}


def plan_migration(
    nuclei: Sequence[Nucleus],
    delta_x: float,
    direction: Sequence[float],
    ref_area: float = 1.0,
) -> MigrationPlan:
    """Build the per-nucleus displacement plan for one image.

    ``delta_x`` is the shared distance; each nucleus moves
    ``delta_x * ref_area / area`` pixels along ``direction`` (normalized
    internally; a zero vector is rejected). ``ref_area = 1`` gives the
    literal inverse-area law; passing e.g. the mean area rescales the
    motion to the image's size scale without changing the law.
    """
    if delta_x < 0:
        raise ValueError(f"delta_x must be >= 0, got {delta_x}")
    if ref_area <= 0:
        raise ValueError(f"ref_area must be > 0, got {ref_area}")
    d = np.asarray(direction, dtype=np.float64)
    if d.shape != (2,):
        raise ValueError(f"direction must be a 2-vector, got shape {d.shape}")
    norm = float(np.hypot(d[0], d[1]))
    if norm == 0.0:
        raise ValueError("direction vector must be nonzero")
    d = d / norm

    entries = []
    for nuc in nuclei:
        if nuc.area < 1:
            raise ValueError(f"nucleus {nuc.id} has empty pixel set")
        disp = delta_x * ref_area / nuc.area
        off = round_half_away_from_zero(disp * d)
        entries.append(
            PlanEntry(
                nucleus_id=nuc.id,
                displacement=float(disp),
                offset=(int(off[0]), int(off[1])),
            )
        )
    return MigrationPlan(
        direction=(float(d[0]), float(d[1])),
        shared_distance=float(delta_x),
        ref_area=float(ref_area),
        per_nucleus=tuple(entries),
    )


def apply_migration(label: InstanceLabelMap, plan: MigrationPlan) -> InstanceLabelMap:
    """Translate every nucleus per the plan and rasterize smaller-on-top.

    The plan must cover exactly the instances present in the label;
    unknown or missing IDs are rejected.
    """
    nuclei = extract_instances(label)
    offsets = plan.offsets_by_id()
    label_ids = {n.id for n in nuclei}
    plan_ids = set(offsets)
    unknown = plan_ids - label_ids
    if unknown:
        raise ValueError(f"plan references unknown instance IDs: {sorted(unknown)}")
    missing = label_ids - plan_ids
    if missing:
        raise ValueError(f"plan missing offsets for instances: {sorted(missing)}")
    return compose_label(
        nuclei,
        [offsets[n.id] for n in nuclei],
        label.shape,
        priority=migration_priority,
    )


def sample_migration_params(
    rng: np.random.Generator,
    delta_x_range: tuple[float, float],
) -> tuple[float, tuple[float, float]]:
    """Draw the once-per-image shared distance and unit direction."""
    lo, hi = delta_x_range
    if lo > hi or lo < 0:
        raise ValueError(f"invalid delta_x range [{lo}, {hi}]")
    delta_x = float(rng.uniform(lo, hi))
    theta = float(rng.uniform(0.0, 2.0 * np.pi))
    return delta_x, (float(np.cos(theta)), float(np.sin(theta)))


def resolve_ref_area(policy, nuclei: Sequence[Nucleus]) -> float:
    """Turn a ref-area policy ('1', 'mean', or a number) into a value."""
    if isinstance(policy, str):
        if policy == "mean":
            if not nuclei:
                return 1.0
            return float(np.mean([n.area for n in nuclei]))
        try:
            value = float(policy)
        except ValueError:
            raise ValueError(f"unknown ref-area policy {policy!r}") from None
    else:
        value = float(policy)
    if value <= 0:
        raise ValueError(f"ref_area must be > 0, got {value}")
    return value
