"""Experiment configuration: JSON loading, validation and a stable hash."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .problems import ConfigError, ProblemSpec
from .sampler import SamplingConfig

EMBEDDINGS = ("cosineMds", "pca")
# fields that never change the produced artifacts
_HASH_EXCLUDED = {"output_dir", "workers", "live_objective"}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    embedding: str = "cosineMds"
    hull_resolution: int = 20
    bands: int = 10
    output_dir: str = "out"
    rng_seed: int = 0

    def __post_init__(self):
        if self.embedding not in EMBEDDINGS:
            raise ConfigError(f"embedding: unknown method {self.embedding!r}; expected one of {EMBEDDINGS}")
        if not 1 <= self.hull_resolution <= 200:
            raise ConfigError("hull_resolution: must lie in [1, 200]")
        if not 1 <= self.bands <= 64:
            raise ConfigError("bands: must lie in [1, 64]")
        if self.sampling.rng_seed != self.rng_seed:
            object.__setattr__(self, "sampling", replace(self.sampling, rng_seed=self.rng_seed))

    def to_dict(self) -> dict:
        return {
            "problem": self.problem.to_dict(),
            "sampling": self.sampling.to_dict(),
            "embedding": self.embedding,
            "hull_resolution": self.hull_resolution,
            "bands": self.bands,
            "output_dir": self.output_dir,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: top level must be a JSON object")
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"config: unknown field(s) {sorted(unknown)}")
        try:
            problem = ProblemSpec.from_dict(d.pop("problem", {}))
            sampling = dict(d.pop("sampling", {}))
            seed = d.get("rng_seed", sampling.get("rng_seed", 0))
            sampling["rng_seed"] = seed
            d["rng_seed"] = seed
            return cls(problem=problem, sampling=SamplingConfig.from_dict(sampling), **d)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from None

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """Copy with top-level or ``sampling.*`` overrides (used by the CLI)."""
        samp = {k[len("sampling."):]: v for k, v in kw.items() if k.startswith("sampling.")}
        top = {k: v for k, v in kw.items() if not k.startswith("sampling.")}
        sampling = replace(self.sampling, **samp) if samp else self.sampling
        if "rng_seed" in top:
            sampling = replace(sampling, rng_seed=top["rng_seed"])
        return replace(self, sampling=sampling, **top)

    def hash(self) -> str:
        return config_hash(self)


def _strip(d):
    if isinstance(d, dict):
        return {k: _strip(v) for k, v in d.items() if k not in _HASH_EXCLUDED}
    return d


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical JSON of all output-relevant fields."""
    text = json.dumps(_strip(cfg.to_dict()), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config: file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from None
    return ExperimentConfig.from_dict(data)
