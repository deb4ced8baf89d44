from typing import Annotated, Literal, Optional, Union
from pydantic import BaseModel, ConfigDict, Field, model_validator
from optivote.models.city import GroundGrid, Point3, UrbanModel
from optivote.models.errors import Rejection
from optivote.models.optics import BeamParams, LinkNoise, MrrParams
from optivote.models.placement import PlacementFile
from optivote.models.trust import TrustWeights
from optivote.types import AssignmentPolicy, Flag, GroundTruth, SemanticLabel, Tier

__all__: list[str] = [
    "HonestGround",
    "Spoofer",
    "SybilMaster",
    "Replayer",
    "GroundBehavior",
    "GroundAgent",
    "HonestVerifier",
    "Suppressor",
    "Forger",
    "VerifierBehavior",
    "VerifierAgent",
    "AgentRoster",
    "LinkConfig",
    "ScenarioConfig",
    "Confusion",
    "EpochReport",
    "ScenarioSummary",
]


class HonestGround(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["honest"] = "honest"


class Spoofer(BaseModel):
    """Claims a location it does not occupy."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["spoofer"] = "spoofer"
    claimed: Point3


class SybilMaster(BaseModel):
    """Emits `count` votes per epoch, each under its own fabricated identity."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["sybil_master"] = "sybil_master"
    count: int = Field(ge=1)
    claimed: Point3


class Replayer(BaseModel):
    """Rebroadcasts the latest vote captured from the ground agent `target`."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["replayer"] = "replayer"
    target: int = Field(ge=0)


GroundBehavior = Annotated[
    Union[HonestGround, Spoofer, SybilMaster, Replayer], Field(discriminator="kind")
]


class GroundAgent(BaseModel):
    """A vote emitter. Its key pair is drawn from the scenario seed at startup.

    Attributes:
        true_location (Optional): Where the agent physically is, None for an agent
            with no physical presence.
        behavior (Optional): How the agent votes. Default to honest.
        has_mrr (Optional): Whether the agent carries a retro-reflector. Default to True.
        label (Optional): The need category of its votes. Default to medical.
        severity (Optional): The severity of its votes. Default to 3.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    true_location: Optional[Point3] = None
    behavior: GroundBehavior = Field(default_factory=HonestGround)
    has_mrr: bool = True
    label: SemanticLabel = SemanticLabel.MEDICAL
    severity: int = Field(3, ge=1, le=5)

    @model_validator(mode="after")
    def check_location(self) -> "GroundAgent":
        if isinstance(self.behavior, HonestGround) and self.true_location is None:
            raise ValueError("An honest agent claims its true location, it needs one.")

        if isinstance(self.behavior, Spoofer) and self.true_location == (
            self.behavior.claimed
        ):
            raise ValueError("A spoofer claims a location other than its own.")

        return self

    @property
    def claimed_location(self) -> Optional[Point3]:
        """The location the agent's own votes carry, None for a replayer."""

        if isinstance(self.behavior, (Spoofer, SybilMaster)):
            return self.behavior.claimed

        if isinstance(self.behavior, HonestGround):
            return self.true_location

        return None


class HonestVerifier(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["honest"] = "honest"


class Suppressor(BaseModel):
    """Drops each of its flags with probability p_suppress."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["suppressor"] = "suppressor"
    p_suppress: float = Field(ge=0, le=1)


class Forger(BaseModel):
    """Flags verified every vote of the colluding ground agents, acts honestly otherwise."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["forger"] = "forger"
    colluders: list[int] = Field(default_factory=list)


VerifierBehavior = Annotated[
    Union[HonestVerifier, Suppressor, Forger], Field(discriminator="kind")
]


class VerifierAgent(BaseModel):
    """A UAV verifier hovering over one of the placement's sites.

    Attributes:
        site: The index of its hover position in the placement.
        behavior (Optional): How the verifier flags. Default to honest.
        tier (Optional): The attestation tier it signs. Default to optical.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    site: int = Field(ge=0)
    behavior: VerifierBehavior = Field(default_factory=HonestVerifier)
    tier: Tier = Tier.OPTICAL


class AgentRoster(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    ground: list[GroundAgent] = Field(default_factory=list)
    verifiers: list[VerifierAgent] = Field(min_length=1)


class LinkConfig(BaseModel):
    """The optical interrogation link shared by every verifier."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    beam: BeamParams
    mrr: MrrParams
    noise: LinkNoise


class ScenarioConfig(BaseModel):
    """A reproducible protocol run.

    Attributes:
        seed: The seed of every random draw of the run.
        city: The city.
        placement: The verifier hover positions.
        agents: The ground agents and the verifiers.
        link: The interrogation link.
        epochs: The number of protocol rounds.
        assignment_policy: How votes are dispatched to verifiers.
        min_assignees (Optional): The number of verifiers each vote is dispatched to.
            Default to 1.
        capture_radius (Optional): How close a responder must be to a claim to
            answer for it (meters). Default to 3.
        epoch_ms (Optional): The duration of a round (milliseconds). Default to 60000.
        start_time_ms (Optional): The ledger clock of the first round.
        freshness_ms (Optional): The freshness window of the ledger. Default to 300000.
        weights (Optional): The trust weights of the summary maps.
        grid (Optional): The grid of the summary maps. Default to 30 m cells over the
            city bounds.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(ge=0, lt=2**64)
    city: UrbanModel
    placement: PlacementFile
    agents: AgentRoster
    link: LinkConfig
    epochs: int = Field(ge=0)
    assignment_policy: AssignmentPolicy = AssignmentPolicy.NEAREST
    min_assignees: int = Field(1, ge=1)
    capture_radius: float = Field(3.0, ge=0)
    epoch_ms: int = Field(60_000, gt=0)
    start_time_ms: int = 1_700_000_000_000
    freshness_ms: int = Field(300_000, ge=0)
    weights: TrustWeights = Field(default_factory=TrustWeights)
    grid: Optional[GroundGrid] = None

    @model_validator(mode="after")
    def check_references(self) -> "ScenarioConfig":
        n_ground: int = len(self.agents.ground)

        for index, verifier in enumerate(self.agents.verifiers):
            if verifier.site >= len(self.placement.sites):
                raise ValueError(f"Verifier {index} hovers over an unknown site.")

            if isinstance(verifier.behavior, Forger) and any(
                not 0 <= colluder < n_ground for colluder in verifier.behavior.colluders
            ):
                raise ValueError(f"Verifier {index} colludes with an unknown agent.")

        for index, agent in enumerate(self.agents.ground):
            if isinstance(agent.behavior, Replayer) and (
                agent.behavior.target >= n_ground or agent.behavior.target == index
            ):
                raise ValueError(f"Ground agent {index} replays an invalid target.")

        return self

    @property
    def map_grid(self) -> GroundGrid:
        return self.grid or GroundGrid.covering(self.city.bounds, 30.0)


class Confusion(BaseModel):
    """Submitted flags against the presence of a real responder at the claim.

    Attributes:
        true_verified: Verified, a responder was there.
        false_verified: Verified, no responder was there.
        true_unverified: Unverified, no responder was there.
        false_unverified: Unverified, a responder was there.
        unknown_backed: Unknown, a responder was there.
        unknown_unbacked: Unknown, no responder was there.
        false_verified_honest: The false_verified flags issued by honest verifiers.
    """

    true_verified: int = 0
    false_verified: int = 0
    true_unverified: int = 0
    false_unverified: int = 0
    unknown_backed: int = 0
    unknown_unbacked: int = 0
    false_verified_honest: int = 0

    def record(self, flag: Flag, backed: bool, honest: bool) -> None:
        if flag is Flag.VERIFIED:
            if backed:
                self.true_verified += 1
            else:
                self.false_verified += 1
                self.false_verified_honest += int(honest)
        elif flag is Flag.UNVERIFIED:
            if backed:
                self.false_unverified += 1
            else:
                self.true_unverified += 1
        elif backed:
            self.unknown_backed += 1
        else:
            self.unknown_unbacked += 1

    @property
    def backed(self) -> int:
        return self.true_verified + self.false_unverified + self.unknown_backed


class EpochReport(BaseModel):
    """What one protocol round did.

    Attributes:
        epoch: The round number, from 0.
        votes_submitted: The votes the ledger accepted.
        attestations: The submitted flags, counted by flag then tier.
        ground_truth: The ground-truth label of each accepted vote, by vote id.
        confusion: The submitted flags against the ground truth.
        suppressed: The flags suppressors dropped.
        forged: The flags forgers overrode.
        honest_visible: The honest votes some assigned verifier has LoS to.
        unattested_honest_visible: Those of them left with no attestation.
        rejections: The records the ledger refused.
    """

    epoch: int
    votes_submitted: int = 0
    attestations: dict[Flag, dict[Tier, int]] = Field(
        default_factory=lambda: {flag: {tier: 0 for tier in Tier} for flag in Flag}
    )
    ground_truth: dict[str, GroundTruth] = Field(default_factory=dict)
    confusion: Confusion = Field(default_factory=Confusion)
    suppressed: int = 0
    forged: int = 0
    honest_visible: int = 0
    unattested_honest_visible: int = 0
    rejections: list[Rejection] = Field(default_factory=list)

    def flag_total(self, flag: Flag) -> int:
        return sum(self.attestations[flag].values())

    @property
    def submitted(self) -> int:
        return sum(self.flag_total(flag) for flag in Flag)


class ScenarioSummary(BaseModel):
    """Run-level resilience metrics.

    Attributes:
        precision (Optional): The share of verified flags backed by a responder.
        recall (Optional): The share of responder-backed flags that are verified.
        suppressed_fraction: The share of issued flags suppressors dropped.
        suppression_exposure (Optional): The share of honest, LoS-covered votes that
            received no attestation.
        sybil_displacement_weighted: The rank displacement of the honest top cells
            caused by sybil votes under the configured weights.
        sybil_displacement_flat: The same displacement with every flag multiplier at 1.
    """

    precision: Optional[float] = None
    recall: Optional[float] = None
    suppressed_fraction: float = 0.0
    suppression_exposure: Optional[float] = None
    sybil_displacement_weighted: int = 0
    sybil_displacement_flat: int = 0
