"""nucleoforge: label-space augmentation for nuclear segmentation data.

Migrates nuclei with a size-inverse displacement law, derives contact
regions between neighbors by synchronous front growth, runs masked
diffusion noising/sampling confined to those regions, and scores
instance segmentations with pooled dataset-level metrics.
"""

from .config import PipelineConfig
from .denoiser import (Adam, OracleDenoiser, StencilDenoiser,
                       TinyConvDenoiser, loss_and_grad, oracle_denoiser,
                       train_tiny_denoiser)
from .diffusion import (NoiseSchedule, as_mask, inpaint_sample,
                        linear_schedule, masked_q_sample, p_step, q_sample,
                        repaint_step, training_loss)
from .internuclear import (GROWTH_BACKEND, InternuclearMask,
                           constrained_dilate, growth_depth,
                           internuclear_mask)
from .labelmap import (InstanceLabelMap, Nucleus, Patch, StructuralLabel,
                       compose_label, compute_structural_label,
                       extract_instances, extract_patches,
                       validate_label_pair)
from .metrics import (MatchResult, aggregate_instancewise, aji,
                      classification_f1, image_stats, match_instances,
                      multiclass_scores, panoptic_quality)
from .migration import (MigrationPlan, PlanEntry, apply_migration,
                        migration_priority, plan_migration,
                        resolve_ref_area, round_half_away_from_zero,
                        sample_migration_params)
from .synth import generate_label, render_image, synth_dataset, synth_one

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "GROWTH_BACKEND",
    "InstanceLabelMap",
    "InternuclearMask",
    "MatchResult",
    "MigrationPlan",
    "NoiseSchedule",
    "Nucleus",
    "OracleDenoiser",
    "Patch",
    "PipelineConfig",
    "PlanEntry",
    "StencilDenoiser",
    "StructuralLabel",
    "TinyConvDenoiser",
    "aggregate_instancewise",
    "aji",
    "apply_migration",
    "as_mask",
    "classification_f1",
    "compose_label",
    "compute_structural_label",
    "constrained_dilate",
    "extract_instances",
    "extract_patches",
    "generate_label",
    "growth_depth",
    "image_stats",
    "inpaint_sample",
    "internuclear_mask",
    "linear_schedule",
    "loss_and_grad",
    "masked_q_sample",
    "match_instances",
    "migration_priority",
    "multiclass_scores",
    "oracle_denoiser",
    "p_step",
    "panoptic_quality",
    "plan_migration",
    "q_sample",
    "render_image",
    "repaint_step",
    "resolve_ref_area",
    "round_half_away_from_zero",
    "sample_migration_params",
    "synth_dataset",
    "synth_one",
    "train_tiny_denoiser",
    "training_loss",
    "validate_label_pair",
]
