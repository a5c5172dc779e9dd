from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.models.ansatz import N_HYPERPARAMS, AdiabaticHyperparams


class HyperparamEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    p: List[float] = Field(..., min_length=N_HYPERPARAMS, max_length=N_HYPERPARAMS)
    t_max: float = Field(..., gt=0)
    fidelity: Optional[float] = Field(None, ge=0, le=1)
    evaluations: Optional[int] = Field(None, ge=0)

    def to_hyperparams(self) -> AdiabaticHyperparams:
        return AdiabaticHyperparams(self.p, self.t_max)


class HyperparameterTable(BaseModel):
    """Optimized adiabatic hyperparameters keyed by chain length."""
    model_config = ConfigDict(extra="forbid")

    unit_mode: Literal["model", "physical"] = "model"
    entries: Dict[int, HyperparamEntry] = Field(default_factory=dict)

    @field_validator("entries", mode="after")
    @classmethod
    def validate_lengths(cls, v):
        if any(n < 2 for n in v):
            raise ValueError("table keys are chain lengths L >= 2")
        return v

    def record(self, n_sites: int, hp: AdiabaticHyperparams, fidelity: Optional[float] = None,
               evaluations: Optional[int] = None) -> None:
        self.entries[n_sites] = HyperparamEntry(
            p=hp.p.tolist(), t_max=hp.t_max, fidelity=fidelity, evaluations=evaluations
        )

    def lookup(self, n_sites: int) -> Optional[Tuple[int, AdiabaticHyperparams]]:
        """Exact entry, else the largest recorded L below the request, else None.

        Returns the key actually used alongside the hyperparameters.
        """
        if n_sites in self.entries:
            return n_sites, self.entries[n_sites].to_hyperparams()
        smaller = [n for n in self.entries if n < n_sites]
        if not smaller:
            return None
        key = max(smaller)
        return key, self.entries[key].to_hyperparams()

    @classmethod
    def load(cls, path: Union[str, Path]) -> "HyperparameterTable":
        return cls.model_validate_json(Path(path).read_text())

    def dump(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.model_dump_json(indent=2))
