import json
from pathlib import Path
from typing import Any, NamedTuple, Optional, Sequence
import numpy as np
from pydantic import ValidationError
import structlog
from optivote.crypto import SignatureScheme, Signer
from optivote.errors import ConfigurationError, LedgerCorruptError, LedgerError
from optivote.fusion import build_crisis_map, rank_displacement
from optivote.geometry import segments_clear
from optivote.ledger import Ledger
from optivote.models import *
from optivote.optics import outage_probability
from optivote.types import AssignmentPolicy, Flag, GroundTruth, Role, SemanticLabel

__all__: list[str] = [
    "ScenarioState",
    "ScenarioRun",
    "assign_votes",
    "run_epoch",
    "run_scenario",
    "summarize",
    "load_scenario",
    "metrics_row",
    "METRICS_HEADER",
]

logger = structlog.get_logger(__name__)

METRICS_HEADER: list[str] = [
    "epoch",
    "votes",
    "verified",
    "unverified",
    "unknown",
    "false_verified",
    "suppressed",
]

_DISPLACEMENT_TOP_K: int = 10


def assign_votes(
    votes: Sequence[VoteRecord],
    verifiers: Sequence[Point3],
    policy: AssignmentPolicy,
    min_assignees: int = 1,
) -> dict[int, list[VoteRecord]]:
    """Dispatch each vote to the verifiers closest to its claim.

    Under the nearest policy distances are 3D, under the partition policy they are
    measured on the ground plane, which splits the area into the Voronoi cells of the
    verifiers. Each vote goes to its min_assignees closest verifiers, ties to the
    lowest verifier index.

    Args:
        votes: The votes.
        verifiers: The verifier positions.
        policy: The distance used.
        min_assignees (Optional): The number of verifiers per vote, capped by the
            number of verifiers. Default to 1.

    Raises:
        ValueError: If there is no verifier.

    Returns:
        dict[int, list[VoteRecord]]: The votes of every verifier index, in input order.
    """

    if not verifiers:
        raise ValueError("Votes cannot be assigned without verifiers.")

    dims: int = 3 if policy is AssignmentPolicy.NEAREST else 2
    stations: np.ndarray = np.array([p.as_tuple() for p in verifiers])[:, :dims]
    count: int = min(min_assignees, len(verifiers))
    assignment: dict[int, list[VoteRecord]] = {i: [] for i in range(len(verifiers))}

    for vote in votes:
        claim: np.ndarray = np.array(vote.claimed_location.as_tuple())[:dims]
        distances: np.ndarray = np.linalg.norm(stations - claim, axis=1)

        for index in np.argsort(distances, kind="stable")[:count]:
            assignment[int(index)].append(vote)

    return assignment


class ScenarioState:
    """The mutable side of a run: generator, keys, ledger and progress.

    Attributes:
        epoch: The index of the next round.
        ledger: The ledger the run writes to.
    """

    def __init__(
        self, config: ScenarioConfig, scheme: Optional[SignatureScheme] = None
    ) -> None:
        """Draw every key of the run and register the verifiers.

        Keys are drawn in this order: ground agents by index (a sybil master, then
        its fabricated identities), then verifiers by index.

        Args:
            config: The scenario.
            scheme (Optional): The signature scheme. Default to Ed25519Scheme.
        """

        self.epoch: int = 0
        self._config: ScenarioConfig = config
        self.rng: np.random.Generator = np.random.default_rng(config.seed)
        self.ledger: Ledger = Ledger(
            scheme=scheme, clock=self.now, freshness_ms=config.freshness_ms
        )
        self.ground: list[Signer] = []
        self.sybils: dict[int, list[Signer]] = {}
        self.owners: dict[str, int] = {}

        for index, agent in enumerate(config.agents.ground):
            self.ground.append(Signer(self.rng.bytes(32), scheme=scheme))
            self.owners[self.ground[-1].identity.public_key] = index

            if isinstance(agent.behavior, SybilMaster):
                self.sybils[index] = [
                    Signer(self.rng.bytes(32), scheme=scheme)
                    for _ in range(agent.behavior.count)
                ]
                self.owners.update(
                    {sybil.identity.public_key: index for sybil in self.sybils[index]}
                )

        self.verifiers: list[Signer] = [
            Signer(self.rng.bytes(32), role=Role.VERIFIER, scheme=scheme)
            for _ in config.agents.verifiers
        ]

        for signer in self.verifiers:
            self.ledger.register(signer.identity)

        sites: list[Point3] = config.placement.points
        self.positions: list[Point3] = [sites[v.site] for v in config.agents.verifiers]
        self.captured: dict[int, VoteRecord] = {}
        self.dispatched: set[str] = set()
        self.truth: dict[str, GroundTruth] = {}

    def now(self) -> int:
        return self._config.start_time_ms + self.epoch * self._config.epoch_ms

    def nonce(self) -> int:
        return int(self.rng.integers(0, 2**64, dtype=np.uint64))


class ScenarioRun(NamedTuple):
    reports: list[EpochReport]
    ledger: Ledger
    summary: ScenarioSummary


def _reject(report: EpochReport, error: LedgerError, record_id: str) -> None:
    report.rejections.append(
        Rejection(code=error.code, message=error.message, record_id=record_id)
    )
    logger.info("record_rejected", code=error.code.value, record=record_id)


def _emit_votes(
    state: ScenarioState, config: ScenarioConfig, report: EpochReport
) -> None:
    """t1: every ground agent votes, in index order."""

    now: int = state.now()

    for index, agent in enumerate(config.agents.ground):
        batch: list[tuple[VoteRecord, GroundTruth]] = []

        if isinstance(agent.behavior, Replayer):
            captured: VoteRecord | None = state.captured.get(agent.behavior.target)

            if captured is not None:
                batch.append((captured, GroundTruth.HONEST))
        elif isinstance(agent.behavior, SybilMaster):
            batch.extend(
                (
                    sybil.vote(
                        agent.claimed_location,
                        now,
                        agent.label,
                        agent.severity,
                        state.nonce(),
                    ),
                    GroundTruth.SYBIL,
                )
                for sybil in state.sybils[index]
            )
        else:
            truth: GroundTruth = (
                GroundTruth.SPOOFED
                if isinstance(agent.behavior, Spoofer)
                else GroundTruth.HONEST
            )
            batch.append(
                (
                    state.ground[index].vote(
                        agent.claimed_location,
                        now,
                        agent.label,
                        agent.severity,
                        state.nonce(),
                    ),
                    truth,
                )
            )

        for vote, truth in batch:
            try:
                state.ledger.submit_vote(vote)
            except LedgerError as e:
                _reject(report, e, vote.vote_id)
                continue

            state.captured[index] = vote
            state.truth[vote.vote_id] = truth
            report.ground_truth[vote.vote_id] = truth
            report.votes_submitted += 1


def _responder_present(config: ScenarioConfig, claim: Point3) -> bool:
    return any(
        agent.has_mrr
        and agent.true_location is not None
        and agent.true_location.distance_to(claim) <= config.capture_radius
        for agent in config.agents.ground
    )


def _colluding(
    state: ScenarioState, behavior: VerifierBehavior, vote: VoteRecord
) -> bool:
    return isinstance(behavior, Forger) and state.owners.get(vote.author) in (
        behavior.colluders
    )


def run_epoch(state: ScenarioState, config: ScenarioConfig) -> EpochReport:
    """Run one t1 to t5 protocol round.

    t1, every ground agent submits its votes. t2, every verifier takes the votes it
    has not handled yet that are assigned to it. t3, without LoS to the claim the flag
    is unknown. t4, with LoS, a responder within capture radius answers and the
    link succeeds with probability 1 - outage (verified), fails (unknown), or nobody
    answers (unverified). t5, the flag is signed and logged, unless the verifier
    suppresses it or forges it.

    Per vote in ledger order and per assigned verifier by ascending index, one draw
    is taken for the link iff there is LoS and a responder, then one for
    suppression iff the verifier is a suppressor.

    Args:
        state: The run state, advanced by one round.
        config: The scenario.

    Returns:
        EpochReport: What the round did. Ledger rejections are listed in it.
    """

    report: EpochReport = EpochReport(epoch=state.epoch)
    _emit_votes(state, config, report)

    pending: list[VoteRecord] = [
        bundle.vote
        for bundle in state.ledger.votes()
        if bundle.vote.vote_id not in state.dispatched
    ]
    assignment: dict[int, list[VoteRecord]] = assign_votes(
        pending, state.positions, config.assignment_policy, config.min_assignees
    )
    assignees: dict[str, list[int]] = {vote.vote_id: [] for vote in pending}

    for verifier, votes in assignment.items():
        for vote in votes:
            assignees[vote.vote_id].append(verifier)

    pairs: list[tuple[VoteRecord, int]] = [
        (vote, verifier) for vote in pending for verifier in assignees[vote.vote_id]
    ]
    visible: np.ndarray = segments_clear(
        np.array([state.positions[j].as_tuple() for _, j in pairs]).reshape(-1, 3),
        np.array([v.claimed_location.as_tuple() for v, _ in pairs]).reshape(-1, 3),
        config.city,
    )
    attested: set[str] = set()
    seen: set[str] = set()
    link: LinkConfig = config.link
    now: int = state.now()

    for (vote, verifier), los in zip(pairs, visible.tolist()):
        agent: VerifierAgent = config.agents.verifiers[verifier]
        claim: Point3 = vote.claimed_location
        backed: bool = _responder_present(config, claim)
        flag: Flag = Flag.UNKNOWN

        if los:
            seen.add(vote.vote_id)

            if backed:
                outage: float = outage_probability(
                    max(state.positions[verifier].distance_to(claim), 1e-9),
                    link.beam,
                    link.mrr,
                    link.noise,
                )
                flag = Flag.VERIFIED if state.rng.random() < 1.0 - outage else flag
            else:
                flag = Flag.UNVERIFIED

        if isinstance(agent.behavior, Suppressor):
            if state.rng.random() < agent.behavior.p_suppress:
                report.suppressed += 1
                continue
        elif _colluding(state, agent.behavior, vote):
            flag = Flag.VERIFIED
            report.forged += 1

        attestation: AttestationRecord = state.verifiers[verifier].attest(
            vote.vote_id, flag, agent.tier, now
        )

        try:
            state.ledger.submit_attestation(attestation)
        except LedgerError as e:
            _reject(report, e, vote.vote_id)
            continue

        attested.add(vote.vote_id)
        report.attestations[flag][agent.tier] += 1
        report.confusion.record(
            flag, backed, honest=isinstance(agent.behavior, HonestVerifier)
        )

    for vote in pending:
        state.dispatched.add(vote.vote_id)

        if state.truth.get(vote.vote_id) is GroundTruth.HONEST and vote.vote_id in seen:
            report.honest_visible += 1
            report.unattested_honest_visible += int(vote.vote_id not in attested)

    logger.info(
        "epoch_done",
        epoch=state.epoch,
        votes=report.votes_submitted,
        flags=report.submitted,
        suppressed=report.suppressed,
        rejections=len(report.rejections),
    )
    state.epoch += 1
    return report


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def summarize(
    reports: Sequence[EpochReport], ledger: Ledger, config: ScenarioConfig
) -> ScenarioSummary:
    """Compute the run-level metrics.

    The sybil displacement compares, per need category of the honest votes, the
    honest-only crisis map with the map of every vote, once with the configured
    weights and once with flat flag multipliers.
    """

    truth: dict[str, GroundTruth] = {}
    confusion: Confusion = Confusion()

    for report in reports:
        truth.update(report.ground_truth)

        for field in Confusion.model_fields:
            setattr(
                confusion,
                field,
                getattr(confusion, field) + getattr(report.confusion, field),
            )

    suppressed: int = sum(report.suppressed for report in reports)
    submitted: int = sum(report.submitted for report in reports)
    bundles: list[VoteBundle] = ledger.votes()
    honest: list[VoteBundle] = [
        bundle
        for bundle in bundles
        if truth.get(bundle.vote.vote_id) is GroundTruth.HONEST
    ]
    displacement: dict[str, int] = {}

    variants: list[tuple[str, TrustWeights]] = [
        ("weighted", config.weights),
        ("flat", config.weights.flat()),
    ]
    labels: list[SemanticLabel] = sorted(
        {bundle.vote.label for bundle in honest}, key=LABELS.index
    )

    for name, weights in variants:
        reference: CrisisMap = build_crisis_map(honest, weights, config.map_grid)
        perturbed: CrisisMap = build_crisis_map(bundles, weights, config.map_grid)
        displacement[name] = sum(
            rank_displacement(reference, perturbed, label, _DISPLACEMENT_TOP_K)
            for label in labels
        )

    return ScenarioSummary(
        precision=_ratio(
            confusion.true_verified, confusion.true_verified + confusion.false_verified
        ),
        recall=_ratio(confusion.true_verified, confusion.backed),
        suppressed_fraction=_ratio(suppressed, suppressed + submitted) or 0.0,
        suppression_exposure=_ratio(
            sum(r.unattested_honest_visible for r in reports),
            sum(r.honest_visible for r in reports),
        ),
        sybil_displacement_weighted=displacement["weighted"],
        sybil_displacement_flat=displacement["flat"],
    )


def run_scenario(
    config: ScenarioConfig, scheme: Optional[SignatureScheme] = None
) -> ScenarioRun:
    """Run every epoch of a scenario.

    Args:
        config: The scenario.
        scheme (Optional): The signature scheme. Default to Ed25519Scheme.

    Raises:
        LedgerCorruptError: If the final ledger does not verify.

    Returns:
        ScenarioRun: The per-epoch reports, the final ledger and the summary.
    """

    state: ScenarioState = ScenarioState(config, scheme)
    reports: list[EpochReport] = [
        run_epoch(state, config) for _ in range(config.epochs)
    ]
    status: ChainStatus = state.ledger.verify_chain()

    if not status.ok:
        raise LedgerCorruptError(status.corrupt_index, status.reason)

    return ScenarioRun(reports, state.ledger, summarize(reports, state.ledger, config))


def metrics_row(report: EpochReport) -> list[int]:
    """The metrics.csv row of a round, in METRICS_HEADER order."""

    return [
        report.epoch,
        report.votes_submitted,
        report.flag_total(Flag.VERIFIED),
        report.flag_total(Flag.UNVERIFIED),
        report.flag_total(Flag.UNKNOWN),
        report.confusion.false_verified,
        report.suppressed,
    ]


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read {path}: {e}") from None


def load_scenario(
    path: str | Path,
    defaults: Optional[dict[str, Any]] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> ScenarioConfig:
    """Load a scenario file.

    The `city` and `placement` keys hold either the documents themselves or paths to
    them, relative to the scenario file.

    Args:
        path: The scenario file.
        defaults (Optional): Values of the keys the file leaves out.
        overrides (Optional): Values replacing those of the file.

    Raises:
        ConfigurationError: If a file cannot be read or the scenario is invalid.

    Returns:
        ScenarioConfig: The validated scenario.
    """

    source: Path = Path(path)
    data: Any = _read_json(source)

    if isinstance(data, dict):
        for key in ("city", "placement"):
            if isinstance(data.get(key), str):
                data[key] = _read_json(source.parent / data[key])

        data = {**(defaults or {}), **data, **(overrides or {})}

    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid scenario {source}: {e}") from None
