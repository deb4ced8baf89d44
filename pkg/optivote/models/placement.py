from typing import Literal
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from optivote.models.city import Point3

__all__: list[str] = [
    "PlacementProblem",
    "PlacementResult",
    "PlacementFile",
]


class PlacementProblem(BaseModel):
    """A UAV multicover placement instance.

    Attributes:
        candidate_sites: The hover positions the UAVs may occupy.
        targets: The ground points to cover.
        n_los: The number of distinct UAVs that must see each target.
        max_uavs: The UAV budget.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    candidate_sites: list[Point3] = Field(min_length=1)
    targets: list[Point3]
    n_los: int = Field(ge=1)
    max_uavs: int = Field(ge=1)


class PlacementResult(BaseModel):
    """The outcome of a placement run.

    Attributes:
        n_los: The redundancy level the placement was computed for.
        chosen_indices: The candidate indices, in selection order.
        chosen_sites: The candidate positions, in selection order.
        coverage_curve: The (k, fraction) pairs after each selection.
        final_counts: The number of chosen UAVs seeing each target.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_los: int = Field(ge=1)
    chosen_indices: list[int] = Field(default_factory=list)
    chosen_sites: list[Point3] = Field(default_factory=list)
    coverage_curve: list[tuple[int, float]] = Field(default_factory=list)
    final_counts: list[int] = Field(default_factory=list)

    @field_validator("coverage_curve")
    @classmethod
    def validate_curve(cls, value: list[tuple[int, float]]) -> list[tuple[int, float]]:
        previous: float = 0.0

        for k, (count, fraction) in enumerate(value, start=1):
            if count != k:
                raise ValueError("The curve must list k = 1, 2, ... in order.")

            if not 0.0 <= fraction <= 1.0 or fraction < previous:
                raise ValueError("Fractions must be non-decreasing within [0, 1].")

            previous = fraction

        return value

    @model_validator(mode="after")
    def check_lengths(self) -> "PlacementResult":
        if len(self.chosen_indices) != len(self.chosen_sites):
            raise ValueError("Chosen indices and sites must have the same length.")

        if len(set(self.chosen_indices)) != len(self.chosen_indices):
            raise ValueError("A candidate may be chosen at most once.")

        if self.coverage_curve and len(self.coverage_curve) != len(self.chosen_sites):
            raise ValueError("The curve must have one entry per chosen site.")

        return self

    @property
    def final_fraction(self) -> float:
        return self.coverage_curve[-1][1] if self.coverage_curve else 0.0


class PlacementFile(BaseModel):
    """The on-disk placement document: {"version": 1, "sites": [[x, y, z], ...]}."""

    model_config = ConfigDict(extra="forbid")

    version: Literal[1] = 1
    sites: list[tuple[float, float, float]] = Field(default_factory=list)

    @classmethod
    def of(cls, sites: list[Point3]) -> "PlacementFile":
        return cls(sites=[site.as_tuple() for site in sites])

    @property
    def points(self) -> list[Point3]:
        return [Point3.of(site) for site in self.sites]
