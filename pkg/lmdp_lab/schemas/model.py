from __future__ import annotations

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class LabModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


####################
# Instance section #
####################

Family = Literal["prop1", "two_state", "jao_tree", "prop5_bandit", "random_comm", "mab"]

# families -> parameters they read
_required = {
    "prop1": ("m",),
    "two_state": ("delta", "eps"),
    "jao_tree": ("s", "a", "m", "delta", "eps"),
    "prop5_bandit": (),
    "random_comm": ("s", "a", "m", "delta"),
    "mab": ("m",),
}


class InstanceSpec(LabModel):
    family: Family
    m: Optional[int] = Field(None, ge=1, description="Number of latent members")
    s: Optional[int] = Field(None, ge=1, description="Number of states")
    a: Optional[int] = Field(None, ge=1, description="Number of actions")
    horizon: int = Field(100, ge=1)
    delta: Optional[float] = Field(None, gt=0.0, description="Transition gap or separation target")
    eps: Optional[float] = Field(None, ge=0.0)
    d_target: Optional[float] = Field(
        None, gt=1.0, description="Diameter target; sets delta = 1 / d_target"
    )
    seed: int = 0

    @model_validator(mode="after")
    def check_family(self):
        if self.d_target is not None:
            if self.delta is not None:
                raise ValueError("give either delta or d_target, not both")
            self.delta = 1.0 / self.d_target
        if self.family == "mab" and self.eps is None:
            self.eps = 0.1
        missing = [p for p in _required[self.family] if getattr(self, p) is None]
        if missing:
            raise ValueError(f"family {self.family} needs {', '.join(missing)}")
        if self.family in ("two_state", "jao_tree") and self.eps > self.delta:
            raise ValueError(f"{self.family} needs eps <= delta")
        if self.family == "prop1" and self.m < 2:
            raise ValueError("prop1 needs m >= 2")
        return self


######################
# Experiment section #
######################

PolicyTag = Literal["alg1", "alg3", "alg4", "dr_exact", "markov_opt", "uniform_random"]


class ExperimentConfig(LabModel):
    instance: Optional[InstanceSpec] = None
    instance_file: Optional[str] = Field(None, description="lmdp-v1 JSON, relative to the config")
    policy: PolicyTag
    horizons: List[int] = Field(description="Strictly increasing episode lengths")
    seeds: int = Field(1, ge=1)
    episodes: int = Field(100, ge=1, description="Episodes per (H, seed, member) cell")
    master_seed: int = 0
    members: Optional[List[int]] = Field(None, description="Real members to test, default all")
    c0: float = Field(1.0, gt=0.0)
    n0: Optional[int] = Field(None, ge=1)
    c: float = Field(1.0, gt=0.0)
    cover: Literal["surrogate", "greedy"] = "surrogate"
    node_limit: int = Field(10**6, ge=1)
    trace: bool = False
    output: Optional[str] = None

    @field_validator("horizons")
    @classmethod
    def increasing(cls, horizons):
        if not horizons:
            raise ValueError("at least one horizon is required")
        if any(h < 1 for h in horizons):
            raise ValueError("horizons must be >= 1")
        if any(b <= a for a, b in zip(horizons, horizons[1:])):
            raise ValueError("horizons must be strictly increasing")
        return horizons

    @model_validator(mode="after")
    def one_instance(self):
        if (self.instance is None) == (self.instance_file is None):
            raise ValueError("give exactly one of instance or instance_file")
        return self


##################
# Report section #
##################


class ReportThresholds(LabModel):
    slope_max: Dict[str, float] = Field(default_factory=lambda: {"alg3": 0.7, "alg4": 0.7})
    flatness_max: Dict[str, float] = Field(default_factory=lambda: {"alg1": 1.5})
    survival_min: float = Field(0.95, ge=0.0, le=1.0)
