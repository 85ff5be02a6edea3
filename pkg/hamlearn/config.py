"""
Config - Validated run configuration

Every configuration object is a pydantic model with forbidden extras, so
typos and out-of-range values fail at load time with a ConfigError.
"""

from typing import Any, Dict, List, Literal, Optional
import json

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ArtifactIOError, ConfigError

GradientMethod = Literal["parameter-shift", "analytic-shift", "finite-difference"]
Optimizer = Literal["gd", "adam"]
Ordering = Literal["forward", "alternating"]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True, allow_inf_nan=False)


class LearnConfig(_Model):
    """Hamiltonian-learning optimizer and model settings."""
    learning_rate: float = Field(0.05, gt=0)
    lr_decay: float = Field(1.0, gt=0, le=1)
    max_epochs: int = Field(2000, ge=0)
    cost_threshold: float = Field(1e-12, ge=0)
    dt: float = Field(0.1, gt=0)
    steps_per_dt: int = Field(4, ge=1)
    ordering: Ordering = "alternating"
    cancel_gates: bool = True
    n_timesteps: int = Field(5, ge=1)
    n_states: int = Field(8, ge=1)
    n_observables: int = Field(3, ge=1)
    seed: int = 0
    gradient_method: GradientMethod = "analytic-shift"
    optimizer: Optimizer = "gd"
    restarts: int = Field(1, ge=1)
    snapshot_every: int = Field(10, ge=1)
    trace_every: int = Field(1, ge=1)
    workers: int = Field(1, ge=1)


class StateLearnConfig(_Model):
    """State-learning optimizer and data settings."""
    learning_rate: float = Field(0.1, gt=0)
    lr_decay: float = Field(1.0, gt=0, le=1)
    max_epochs: int = Field(2000, ge=0)
    cost_threshold: float = Field(1e-12, ge=0)
    dt: float = Field(0.1, gt=0)
    n_hamiltonians: int = Field(4, ge=1)
    n_timesteps: int = Field(5, ge=1)
    n_observables: Optional[int] = Field(None, ge=1)
    seed: int = 0
    gradient_method: Literal["parameter-shift", "finite-difference"] = "parameter-shift"
    optimizer: Optimizer = "gd"
    restarts: int = Field(3, ge=1)
    snapshot_every: int = Field(10, ge=1)
    workers: int = Field(1, ge=1)


class Su3LearnConfig(_Model):
    """Qutrit learning settings."""
    learning_rate: float = Field(0.05, gt=0)
    lr_decay: float = Field(1.0, gt=0, le=1)
    max_epochs: int = Field(2000, ge=0)
    cost_threshold: float = Field(1e-14, ge=0)
    dt: float = Field(0.1, gt=0)
    n_states: int = Field(6, ge=1)
    n_timesteps: int = Field(8, ge=1)
    n_observables: int = Field(8, ge=1, le=9)
    bch_order: int = Field(12, ge=0)
    seed: int = 0
    optimizer: Optimizer = "gd"
    snapshot_every: int = Field(10, ge=1)


class HamiltonianSpec(_Model):
    """Which Hamiltonian to build (family, size and coefficients)."""
    family: str = "zz-xx"
    num_sites: int = Field(3, ge=2)
    seed: Optional[int] = None
    coeffs: Optional[List[float]] = None
    basis: Optional[List[str]] = None
    groups: Optional[List[int]] = None


class DataSpec(_Model):
    """Dataset shape and held-out validation settings."""
    kind: Literal["hamiltonian", "state", "su3"] = "hamiltonian"
    observables: Optional[List[str]] = None
    noise_sigma: float = Field(0.0, ge=0)
    heldout: List[str] = Field(default_factory=lambda: ["ZM"])
    heldout_states: int = Field(1, ge=1)
    heldout_timesteps: Optional[int] = Field(None, ge=1)


class StateSpec(_Model):
    """Target state for state learning."""
    num_qubits: int = Field(2, ge=2)
    num_layers: Optional[int] = Field(None, ge=0)
    target_seed: int = 1
    hamiltonian_family: str = "generic-2local"


class Su3Spec(_Model):
    """True qutrit Hamiltonian coefficients (drawn when omitted)."""
    coeffs: Optional[List[float]] = None
    seed: int = 0

    @model_validator(mode="after")
    def _eight(self) -> "Su3Spec":
        if self.coeffs is not None and len(self.coeffs) != 8:
            raise ValueError(f"SU(3) Hamiltonians take 8 coefficients, got {len(self.coeffs)}")
        return self


class SweepSpec(_Model):
    """Grid of dataset sizes for a sweep."""
    learner: Literal["ham", "state"] = "ham"
    n_timesteps: List[int] = Field(default_factory=lambda: [1, 3, 5])
    n_states: List[int] = Field(default_factory=lambda: [2, 6, 8])
    n_observables: List[int] = Field(default_factory=lambda: [1, 3, 6])
    n_hamiltonians: List[int] = Field(default_factory=lambda: [1, 2, 4])

    @model_validator(mode="after")
    def _positive(self) -> "SweepSpec":
        for name in ("n_timesteps", "n_states", "n_observables", "n_hamiltonians"):
            values = getattr(self, name)
            if not values or any(v < 1 for v in values):
                raise ValueError(f"sweep.{name} must be a non-empty list of positive integers")
        return self


class InputSpec(_Model):
    """Files consumed by learn (dataset) and validate (model, truth)."""
    dataset: Optional[str] = None
    model: Optional[str] = None
    truth: Optional[str] = None


Mode = Literal["gen-data", "learn-ham", "learn-state", "learn-su3", "sweep", "validate"]


class ExperimentConfig(_Model):
    """
    One experiment.

    Attributes:
        mode: Command the config is meant for
        seed: Master seed; every random stream derives from it
        parallel: Worker-pool size for sweeps (None = available cores)
    """
    mode: Mode = "learn-ham"
    seed: int = Field(0, ge=0, lt=2 ** 64)
    parallel: Optional[int] = Field(None, ge=1)
    hamiltonian: HamiltonianSpec = Field(default_factory=HamiltonianSpec)
    data: DataSpec = Field(default_factory=DataSpec)
    learn: LearnConfig = Field(default_factory=LearnConfig)
    state: StateSpec = Field(default_factory=StateSpec)
    state_learn: StateLearnConfig = Field(default_factory=StateLearnConfig)
    su3: Su3Spec = Field(default_factory=Su3Spec)
    su3_learn: Su3LearnConfig = Field(default_factory=Su3LearnConfig)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    inputs: InputSpec = Field(default_factory=InputSpec)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"Invalid experiment config: {e}") from e

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        """Read and validate a JSON config file."""
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as e:
            raise ArtifactIOError(f"Cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config {path} must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, seed: Optional[int] = None, parallel: Optional[int] = None,
                       mode: Optional[str] = None) -> "ExperimentConfig":
        """Copy with command-line overrides applied and re-validated."""
        data = self.model_dump()
        if seed is not None:
            data["seed"] = seed
        if parallel is not None:
            data["parallel"] = parallel
        if mode is not None:
            data["mode"] = mode
        return ExperimentConfig.from_dict(data)

    def resolved(self) -> Dict[str, Any]:
        """Plain-JSON form embedded in every artifact."""
        return self.model_dump(mode="json")
