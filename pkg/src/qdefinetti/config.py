"""Experiment configuration models (YAML or JSON on disk)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BudgetConfig(_Strict):
    restarts: int = Field(20, ge=1)
    sweeps: int = Field(3, ge=1)
    maxfev: int = Field(120, ge=10)


# -- verify-info --------------------------------------------------------------

InfoCheck = Literal["ssa", "chain-rule", "araki-lieb", "pinsker", "data-processing"]


class VerifyInfoConfig(_Strict):
    command: Literal["verify-info"] = "verify-info"
    seed: int = Field(1, ge=0)
    dims: list[int] = Field(default_factory=lambda: [2, 2, 2], min_length=3, max_length=3)
    state_kind: Literal["mixed-hs", "pure-haar"] = "mixed-hs"
    samples: int = Field(500, ge=1)
    measurement_pairs: int = Field(100, ge=0)
    checks: list[InfoCheck] = Field(default_factory=lambda: ["ssa", "chain-rule", "araki-lieb", "pinsker", "data-processing"])
    tolerance: float = Field(1e-9, gt=0)

    @field_validator("dims")
    @classmethod
    def _positive(cls, v):
        if any(d < 1 for d in v):
            raise ValueError("dims must be positive")
        return v


# -- verify-definetti -------------------------------------------------------


class StateSpec(_Strict):
    kind: Literal["random-symmetric-pure", "product", "ghz"]
    d: int = Field(2, ge=2)
    N: Union[int, list[int]] = 4
    k: int = Field(2, ge=1)
    count: int = Field(1, ge=1)
    ensemble: Literal["greedy", "computational"] = "greedy"

    @model_validator(mode="after")
    def _check_k(self):
        for n in self.N_values:
            if not 1 <= self.k < n:
                raise ValueError(f"need 1 <= k < N (k={self.k}, N={n})")
        return self

    @property
    def N_values(self) -> list[int]:
        return [self.N] if isinstance(self.N, int) else list(self.N)


class ProjectedSpec(_Strict):
    d: int = Field(2, ge=2)
    N: Union[int, list[int]] = 6
    rank: int = Field(1, ge=1)
    count: int = Field(1, ge=1)

    @property
    def N_values(self) -> list[int]:
        return [self.N] if isinstance(self.N, int) else list(self.N)


class VerifyDeFinettiConfig(_Strict):
    command: Literal["verify-definetti"] = "verify-definetti"
    seed: int = Field(0, ge=0)
    budget: BudgetConfig = Field(default_factory=BudgetConfig)
    states: list[StateSpec] = Field(default_factory=list)
    projected: list[ProjectedSpec] = Field(default_factory=list)


# -- meanfield ----------------------------------------------------------------


class PotentialConfig(_Strict):
    kind: Literal["none", "harmonic", "constant"] = "none"
    strength: float = 1.0


class VectorPotentialConfig(_Strict):
    kind: Literal["none", "uniform"] = "none"
    field: float = 0.0


class InteractionConfig(_Strict):
    kind: Literal["none", "gaussian", "tophat", "delta", "constant"] = "none"
    amplitude: float = 1.0
    width: float = Field(1.0, gt=0)


class ModelConfig(_Strict):
    space_dim: Literal[1, 2] = 1
    L: int = Field(12, ge=2)
    spacing: Optional[float] = Field(None, gt=0)
    box_radius: Optional[float] = Field(None, gt=0)
    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    vector_potential: VectorPotentialConfig = Field(default_factory=VectorPotentialConfig)
    interaction: InteractionConfig = Field(default_factory=InteractionConfig)
    beta: float = Field(0.0, ge=0)
    boundary: Literal["dirichlet", "periodic"] = "dirichlet"

    @model_validator(mode="after")
    def _grid(self):
        if (self.spacing is None) == (self.box_radius is None):
            raise ValueError("give exactly one of spacing, box_radius")
        return self


class SweepCheck(_Strict):
    N_values: list[int] = Field(default_factory=lambda: [2, 3, 4, 5, 6])
    max_monotone_violations: int = Field(1, ge=0)


class H2GapCheck(_Strict):
    N_values: list[int] = Field(default_factory=lambda: [3, 4])
    epsilon: float = Field(0.5, gt=0, lt=1)
    constants: list[float] = Field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64])
    max_constant: float = 8.0


class FourierCheck(_Strict):
    L_values: list[int] = Field(default_factory=lambda: [8, 16, 32])
    spacing: float = Field(0.5, gt=0)
    N: int = Field(4, ge=2)
    kinds: list[Literal["gaussian", "tophat", "delta"]] = Field(default_factory=lambda: ["gaussian", "tophat"])


class StabilityCheck(_Strict):
    N_values: list[int] = Field(default_factory=lambda: [4, 8])
    samples: int = Field(50, ge=1)
    max_ratio: float = 2.0


class MeanfieldConfig(_Strict):
    command: Literal["meanfield"] = "meanfield"
    seed: int = Field(0, ge=0)
    model: ModelConfig = Field(default_factory=lambda: ModelConfig(spacing=1.0))
    ground_state_tol: float = Field(1e-9, gt=0)
    sweep: Optional[SweepCheck] = None
    h2_gap: Optional[H2GapCheck] = None
    fourier: Optional[FourierCheck] = None
    stability: Optional[StabilityCheck] = None


CONFIG_MODELS = {
    "verify-info": VerifyInfoConfig,
    "verify-definetti": VerifyDeFinettiConfig,
    "meanfield": MeanfieldConfig,
}


def load_raw(path) -> dict:
    text = Path(path).read_text()
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError("config root must be a mapping")
    return data


def load_config(command: str, path=None, overrides: dict | None = None):
    raw = load_raw(path) if path else {}
    raw.update(overrides or {})
    return CONFIG_MODELS[command].model_validate(raw)


def json_schema(command: str) -> dict:
    return CONFIG_MODELS[command].model_json_schema()


def write_schemas(directory) -> list[Path]:
    out = []
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in CONFIG_MODELS:
        p = d / f"{name}.schema.json"
        p.write_text(json.dumps(json_schema(name), indent=2, sort_keys=True) + "\n")
        out.append(p)
    return out


if __name__ == "__main__":
    import sys

    for p in write_schemas(sys.argv[1] if len(sys.argv) > 1 else "schemas"):
        print(p)
