import math
from typing import Final, Iterable, Sequence
import numpy as np
import structlog
from optivote.errors import MismatchedAttestationError
from optivote.models.city import GroundGrid, Point3
from optivote.models.ledger import AttestationRecord, VoteBundle, VoteRecord
from optivote.models.trust import LABELS, CrisisMap, TrustWeights
from optivote.types import SemanticLabel

__all__: list[str] = [
    "score_vote",
    "build_crisis_map",
    "top_k_cells",
    "rank_displacement",
]

logger = structlog.get_logger(__name__)

# Scores closer than this relative gap rank as ties.
_TIE_TOLERANCE: Final[float] = 1e-9


def score_vote(
    vote: VoteRecord,
    attestations: Sequence[AttestationRecord],
    weights: TrustWeights,
) -> float:
    """Trust-weighted score of a vote.

    Args:
        vote: The vote.
        attestations: The attestations logged against the vote.
        weights: The agency's weights.

    Raises:
        MismatchedAttestationError: If an attestation targets another vote.

    Returns:
        float: severity * semantic weight * baseline * the product of the flag
            multipliers of every attestation.
    """

    score: float = (
        vote.severity * weights.semantic_weights[vote.label] * weights.baseline
    )

    for attestation in attestations:
        if attestation.target_vote_id != vote.vote_id:
            raise MismatchedAttestationError(
                f"Attestation targets {attestation.target_vote_id}, not {vote.vote_id}."
            )

        score *= weights.multiplier(attestation.flag, attestation.tier)

    return score


def build_crisis_map(
    entries: Iterable[VoteBundle], weights: TrustWeights, grid: GroundGrid
) -> CrisisMap:
    """Accumulate vote scores into the ground cells holding their claims.

    Cells are right-open, so a claim on an interior boundary lands in the higher
    cell. Claims outside the grid are counted, not scored.

    Args:
        entries: The votes with their attestations.
        weights: The agency's weights.
        grid: The ground discretization.

    Returns:
        CrisisMap: The map.
    """

    rows: list[int] = []
    cols: list[int] = []
    layers: list[int] = []
    values: list[float] = []
    out_of_extent: int = 0

    for bundle in entries:
        location: Point3 = bundle.vote.claimed_location
        cell: tuple[int, int] | None = grid.cell_of(location.x, location.y)

        if cell is None:
            out_of_extent += 1
            continue

        cols.append(cell[0])
        rows.append(cell[1])
        layers.append(LABELS.index(bundle.vote.label))
        values.append(score_vote(bundle.vote, bundle.attestations, weights))

    scores: np.ndarray = np.zeros((grid.ny, grid.nx, len(LABELS)))

    if values:
        np.add.at(scores, (rows, cols, layers), values)

    if out_of_extent:
        logger.warning("votes_out_of_extent", count=out_of_extent)

    return CrisisMap(grid=grid, scores=scores, out_of_extent=out_of_extent)


def _ranked(crisis_map: CrisisMap, label: SemanticLabel) -> list[tuple[int, float]]:
    flat: np.ndarray = crisis_map.label_scores(label).ravel()
    cells: np.ndarray = np.flatnonzero(flat > 0)
    ordered: list[int] = sorted(cells.tolist(), key=lambda cell: (-flat[cell], cell))
    tiers: dict[int, float] = {}
    head: float = math.inf

    # Each run of scores within the tolerance of its first value is one tie group.
    for cell in ordered:
        if not math.isclose(flat[cell], head, rel_tol=_TIE_TOLERANCE):
            head = float(flat[cell])

        tiers[cell] = head

    ordered.sort(key=lambda cell: (-tiers[cell], cell))
    return [(cell, float(flat[cell])) for cell in ordered]


def top_k_cells(
    crisis_map: CrisisMap, label: SemanticLabel, k: int
) -> list[tuple[int, float]]:
    """The k highest-scoring cells of a category.

    Args:
        crisis_map: The map.
        label: The category.
        k: The number of cells wanted.

    Raises:
        ValueError: If k < 1.

    Returns:
        list[tuple[int, float]]: The (cell index, score) pairs, best first, ties by
            lowest cell index. Only non-zero cells are listed.
    """

    if k < 1:
        raise ValueError("k must be at least 1.")

    return _ranked(crisis_map, label)[:k]


def rank_displacement(
    reference: CrisisMap, perturbed: CrisisMap, label: SemanticLabel, k: int
) -> int:
    """How far the top cells of a reference map moved in a perturbed map.

    Args:
        reference: The map without perturbation.
        perturbed: The map with the perturbation.
        label: The category.
        k: The number of reference top cells to follow.

    Returns:
        int: The sum over the reference top-k of |perturbed rank - reference rank|. A
            cell absent from the perturbed ranking counts as ranked last.
    """

    ranking: list[tuple[int, float]] = _ranked(perturbed, label)
    ranks: dict[int, int] = {cell: rank for rank, (cell, _) in enumerate(ranking)}
    return sum(
        abs(ranks.get(cell, len(ranking)) - rank)
        for rank, (cell, _) in enumerate(top_k_cells(reference, label, k))
    )
