from typing import Any
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from optivote.models.city import GroundGrid
from optivote.types import Flag, SemanticLabel, Tier

__all__: list[str] = [
    "TrustWeights",
    "CrisisMap",
    "LABELS",
]

LABELS: list[SemanticLabel] = list(SemanticLabel)


def _default_multipliers() -> dict[Flag, dict[Tier, float]]:
    return {
        Flag.VERIFIED: {Tier.OPTICAL: 2.0, Tier.RF: 1.5},
        Flag.UNVERIFIED: {Tier.OPTICAL: 0.25, Tier.RF: 0.25},
        Flag.UNKNOWN: {Tier.OPTICAL: 1.0, Tier.RF: 1.0},
    }


def _default_semantic_weights() -> dict[SemanticLabel, float]:
    weights: dict[SemanticLabel, float] = {label: 1.0 for label in SemanticLabel}
    weights[SemanticLabel.MEDICAL] = 2.0
    weights[SemanticLabel.TRAPPED] = 2.0
    weights[SemanticLabel.GAS_LEAK] = 1.5
    return weights


class TrustWeights(BaseModel):
    """How much an agency trusts each kind of evidence.

    Attributes:
        flag_multipliers (Optional): The score factor of one attestation, by flag and
            tier.
        semantic_weights (Optional): The priority of each need category. Missing
            categories weigh 1.
        baseline (Optional): The factor every vote starts from. Default to 1.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    flag_multipliers: dict[Flag, dict[Tier, float]] = Field(
        default_factory=_default_multipliers
    )
    semantic_weights: dict[SemanticLabel, float] = Field(
        default_factory=_default_semantic_weights
    )
    baseline: float = Field(1.0, gt=0)

    @field_validator("flag_multipliers")
    @classmethod
    def validate_multipliers(
        cls, value: dict[Flag, dict[Tier, float]]
    ) -> dict[Flag, dict[Tier, float]]:
        for flag in Flag:
            for tier in Tier:
                if value.get(flag, {}).get(tier) is None:
                    raise ValueError(
                        f"Missing multiplier for ({flag.value}, {tier.value})."
                    )

                if value[flag][tier] < 0:
                    raise ValueError("Multipliers cannot be negative.")

        return value

    @field_validator("semantic_weights")
    @classmethod
    def validate_semantic_weights(
        cls, value: dict[SemanticLabel, float]
    ) -> dict[SemanticLabel, float]:
        if any(weight <= 0 for weight in value.values()):
            raise ValueError("Semantic weights must be positive.")

        return {label: value.get(label, 1.0) for label in SemanticLabel}

    @model_validator(mode="after")
    def check_ordering(self) -> "TrustWeights":
        verified: dict[Tier, float] = self.flag_multipliers[Flag.VERIFIED]
        unverified: dict[Tier, float] = self.flag_multipliers[Flag.UNVERIFIED]

        if verified[Tier.OPTICAL] < verified[Tier.RF]:
            raise ValueError("Optical confirmations cannot weigh less than RF ones.")

        if max(unverified.values()) > 1.0 or min(verified.values()) < 1.0:
            raise ValueError("Multipliers must satisfy unverified <= 1 <= verified.")

        return self

    def multiplier(self, flag: Flag, tier: Tier) -> float:
        return self.flag_multipliers[flag][tier]

    def scaled(self, factor: float) -> "TrustWeights":
        """Copy with every semantic weight multiplied by a positive factor."""

        return self.model_validate(
            {
                **self.model_dump(),
                "semantic_weights": {
                    label: weight * factor
                    for label, weight in self.semantic_weights.items()
                },
            }
        )

    def flat(self) -> "TrustWeights":
        """Copy with every flag multiplier set to 1, i.e. ignoring attestations."""

        return self.model_validate(
            {
                **self.model_dump(),
                "flag_multipliers": {
                    flag: {tier: 1.0 for tier in Tier} for flag in Flag
                },
            }
        )


class CrisisMap(BaseModel):
    """Trust-weighted need scores per ground cell and need category.

    Attributes:
        grid: The ground discretization.
        scores: The (ny, nx, len(LABELS)) score array.
        out_of_extent (Optional): The votes whose claim fell outside the grid.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: GroundGrid
    scores: np.ndarray
    out_of_extent: int = 0

    @model_validator(mode="after")
    def check_scores(self) -> "CrisisMap":
        expected: tuple[int, int, int] = (self.grid.ny, self.grid.nx, len(LABELS))

        if self.scores.shape != expected:
            raise ValueError(
                f"Scores have shape {self.scores.shape}, expected {expected}."
            )

        if not np.all(np.isfinite(self.scores)) or np.any(self.scores < 0):
            raise ValueError("Scores must be finite and non-negative.")

        return self

    @classmethod
    def empty(cls, grid: GroundGrid) -> "CrisisMap":
        return cls(grid=grid, scores=np.zeros((grid.ny, grid.nx, len(LABELS))))

    def label_scores(self, label: SemanticLabel) -> np.ndarray:
        """The (ny, nx) scores of one category."""

        return self.scores[:, :, LABELS.index(label)]

    def __add__(self, other: Any) -> "CrisisMap":
        if not isinstance(other, CrisisMap) or other.grid != self.grid:
            return NotImplemented

        return CrisisMap(
            grid=self.grid,
            scores=self.scores + other.scores,
            out_of_extent=self.out_of_extent + other.out_of_extent,
        )

    def rows(self) -> list[tuple[int, int, str, float]]:
        """The non-zero (cell_x, cell_y, label, score) rows, row-major then label order."""

        return [
            (int(ix), int(iy), LABELS[k].value, float(self.scores[iy, ix, k]))
            for iy, ix, k in zip(*np.nonzero(self.scores > 0))
        ]
