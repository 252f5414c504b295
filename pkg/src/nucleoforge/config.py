"""Pipeline configuration: defaults, JSON round-trip, flag overrides."""

import json
from dataclasses import asdict, dataclass, fields


@dataclass
class PipelineConfig:
    """Every knob the command-line pipeline accepts, with defaults.

    delta_x_min/max bound the per-image migration distance draw;
    ref_area is the reference-area policy for the inverse-size law
    ("1", "mean", or a number as a string); patch_size/patch_stride
    control tiling; schedule_t/beta_1/beta_t define the noise schedule.
    """

    seed: int = 0
    delta_x_min: float = 30.0
    delta_x_max: float = 100.0
    ref_area: str = "1"
    halo_iters: int = 2
    max_iters: int = 10
    patch_size: int = 256
    patch_stride: int = 164
    schedule_t: int = 50
    beta_1: float = 1e-4
    beta_t: float = 0.2
    invert_repaint_mask: bool = False
    deterministic_sampling: bool = False
    workers: int = 4
    out_dir: str = "out"
    manifest: str = ""

    def __post_init__(self):
        if self.delta_x_min < 0 or self.delta_x_max < self.delta_x_min:
            raise ValueError("need 0 <= delta_x_min <= delta_x_max, got "
                             "%g..%g" % (self.delta_x_min, self.delta_x_max))
        if self.halo_iters < 0:
            raise ValueError("halo_iters must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.patch_size < 1 or self.patch_stride < 1:
            raise ValueError("patch size and stride must be >= 1")
        if self.schedule_t < 1:
            raise ValueError("schedule_t must be >= 1")
        if not (0.0 < self.beta_1 <= self.beta_t < 1.0):
            raise ValueError("need 0 < beta_1 <= beta_t < 1, got %g, %g"
                             % (self.beta_1, self.beta_t))
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.ref_area not in ("1", "mean"):
            try:
                value = float(self.ref_area)
            except (TypeError, ValueError):
                raise ValueError("ref_area must be '1', 'mean', or a number, "
                                 "got %r" % (self.ref_area,))
            if value <= 0:
                raise ValueError("numeric ref_area must be > 0, got %g"
                                 % value)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data):
        valid = {f.name for f in fields(cls)}
        unknown = set(data) - valid
        if unknown:
            raise ValueError("unknown config keys: %s" % sorted(unknown))
        return cls(**data)

    @classmethod
    def from_json_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **overrides):
        """New config with non-None overrides applied (and revalidated)."""
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in data:
                raise ValueError("unknown config key: %s" % key)
            data[key] = value
        return type(self).from_dict(data)
