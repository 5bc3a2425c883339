"""Run configuration, JSON config files, and config fingerprinting."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields


@dataclass(frozen=True)
class RunConfig:
    """Decoding-pipeline parameters with the published defaults."""

    band: tuple[float, float] = (8.0, 30.0)
    filter_order: int = 2
    n_pairs: int = 3
    shrinkage: float = 0.05
    k_folds: int = 5
    seed: int = 0
    filter_stage: str = "continuous"  # or "epoch"
    log_variance_mode: str = "plain"  # or "normalized"

    def __post_init__(self):
        low, high = self.band
        if not (0 < low < high):
            raise ValueError(f"band must satisfy 0 < low < high, got {self.band}")
        object.__setattr__(self, "band", (float(low), float(high)))
        if self.filter_order < 1:
            raise ValueError("filter_order must be >= 1")
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if not (0.0 <= self.shrinkage <= 1.0):
            raise ValueError("shrinkage must be in [0, 1]")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")
        if self.filter_stage not in ("continuous", "epoch"):
            raise ValueError("filter_stage must be 'continuous' or 'epoch'")
        if self.log_variance_mode not in ("plain", "normalized"):
            raise ValueError("log_variance_mode must be 'plain' or 'normalized'")

    def to_dict(self) -> dict:
        return {
            "band": list(self.band),
            "filter_order": self.filter_order,
            "n_pairs": self.n_pairs,
            "shrinkage": self.shrinkage,
            "k_folds": self.k_folds,
            "seed": self.seed,
            "filter_stage": self.filter_stage,
            "log_variance_mode": self.log_variance_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown RunConfig keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "band" in kwargs:
            kwargs["band"] = tuple(kwargs["band"])
        return cls(**kwargs)

    @property
    def fingerprint(self) -> str:
        """Stable hash of the canonicalized config."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def load_config_file(path) -> dict:
    """Parse a JSON config document with optional run/synth/swarm/timing sections.

    Unknown top-level keys are an error so typos fail loudly; section
    contents are validated by their home dataclasses.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    allowed = {"run", "synth", "swarm", "timing"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"{path}: unknown config sections: {sorted(unknown)}")
    for key in allowed:
        if key in doc and not isinstance(doc[key], dict):
            raise ValueError(f"{path}: section {key!r} must be a JSON object")
    return doc
