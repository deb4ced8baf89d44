from itertools import combinations
from typing import Final, Optional, Sequence
import numpy as np
import structlog
from optivote.errors import DimensionMismatchError, InstanceTooLargeError
from optivote.geometry import candidate_sites, ground_targets, visibility_matrix
from optivote.models.city import GroundGrid, Point3, UrbanModel
from optivote.models.placement import PlacementProblem, PlacementResult

__all__: list[str] = [
    "coverage_fraction",
    "greedy_place",
    "brute_force_place",
    "uavs_for_coverage",
    "plan_coverage",
]

logger = structlog.get_logger(__name__)

BRUTE_FORCE_LIMIT: Final[int] = 15


def coverage_fraction(counts: Sequence[int] | np.ndarray, n_los: int) -> float:
    """Share of targets seen by at least n_los UAVs.

    Args:
        counts: The per-target coverage counts.
        n_los: The redundancy requirement.

    Raises:
        ValueError: If counts is empty.

    Returns:
        float: The covered fraction in [0, 1].
    """

    values: np.ndarray = np.asarray(counts)

    if values.size == 0:
        raise ValueError("Coverage is undefined without targets.")

    return int(np.count_nonzero(values >= n_los)) / values.size


def _check_dimensions(problem: PlacementProblem, vis: np.ndarray) -> np.ndarray:
    matrix: np.ndarray = np.asarray(vis, dtype=bool)
    expected: tuple[int, int] = (len(problem.candidate_sites), len(problem.targets))

    if matrix.shape != expected:
        raise DimensionMismatchError(
            f"Visibility matrix has shape {matrix.shape}, expected {expected}."
        )

    return matrix


def greedy_place(problem: PlacementProblem, vis: np.ndarray) -> PlacementResult:
    """Place UAVs one at a time, each time on the site removing the most deficit.

    The gain of a candidate is the number of targets it sees whose count is still below
    n_los. The loop stops when every target is covered n_los times, when no candidate
    has a positive gain, or when the budget is spent. Ties go to the lowest index.

    Args:
        problem: The placement instance.
        vis: The (candidates, targets) visibility matrix.

    Raises:
        DimensionMismatchError: If vis does not match the problem.

    Returns:
        PlacementResult: The selection and its coverage curve.
    """

    matrix: np.ndarray = _check_dimensions(problem, vis)
    weights: np.ndarray = matrix.astype(np.int64)
    counts: np.ndarray = np.zeros(matrix.shape[1], dtype=np.int64)
    available: np.ndarray = np.ones(matrix.shape[0], dtype=bool)
    chosen: list[int] = []
    curve: list[tuple[int, float]] = []

    while len(chosen) < problem.max_uavs and matrix.shape[1]:
        deficit: np.ndarray = counts < problem.n_los

        if not deficit.any():
            break

        gains: np.ndarray = np.where(available, weights @ deficit, -1)
        best: int = int(np.argmax(gains))

        if gains[best] <= 0:
            break

        chosen.append(best)
        available[best] = False
        counts += weights[best]
        curve.append((len(chosen), coverage_fraction(counts, problem.n_los)))
        logger.debug(
            "placement_step",
            k=len(chosen),
            site=best,
            gain=int(gains[best]),
            coverage=curve[-1][1],
        )

    return PlacementResult(
        n_los=problem.n_los,
        chosen_indices=chosen,
        chosen_sites=[problem.candidate_sites[i] for i in chosen],
        coverage_curve=curve,
        final_counts=counts.tolist(),
    )


def brute_force_place(
    problem: PlacementProblem, vis: np.ndarray
) -> tuple[tuple[int, ...], float]:
    """Exhaustively search the best subset of at most max_uavs candidates.

    Args:
        problem: The placement instance.
        vis: The (candidates, targets) visibility matrix.

    Raises:
        DimensionMismatchError: If vis does not match the problem.
        InstanceTooLargeError: If there are more than 15 candidates.

    Returns:
        tuple[tuple[int, ...], float]: The lexicographically smallest optimal index set
            and its coverage fraction.
    """

    matrix: np.ndarray = _check_dimensions(problem, vis)
    n_sites: int = matrix.shape[0]

    if n_sites > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(
            f"{n_sites} candidates exceed the exhaustive search limit "
            f"of {BRUTE_FORCE_LIMIT}."
        )

    weights: np.ndarray = matrix.astype(np.int64)
    best_subset: tuple[int, ...] = ()
    best_fraction: float = coverage_fraction(
        np.zeros(matrix.shape[1], dtype=np.int64), problem.n_los
    )

    for size in range(1, min(problem.max_uavs, n_sites) + 1):
        for subset in combinations(range(n_sites), size):
            fraction: float = coverage_fraction(
                weights[list(subset)].sum(axis=0), problem.n_los
            )

            if fraction > best_fraction or (
                fraction == best_fraction and subset < best_subset
            ):
                best_subset, best_fraction = subset, fraction

    return best_subset, best_fraction


def uavs_for_coverage(
    curve: Sequence[tuple[int, float]], fraction: float
) -> Optional[int]:
    """The smallest UAV count whose coverage reaches the fraction, None if never."""

    for k, covered in curve:
        if covered >= fraction:
            return k

    return None


def plan_coverage(
    model: UrbanModel,
    grid: GroundGrid,
    altitude: float,
    spacing: float,
    n_los_values: Sequence[int],
    max_uavs: int,
) -> dict[int, PlacementResult]:
    """Run the greedy placement for several redundancy levels over one city.

    The visibility matrix is computed once and shared by every level.

    Args:
        model: The city.
        grid: The ground discretization.
        altitude: The hover altitude of the candidate sites.
        spacing: The spacing of the candidate sites.
        n_los_values: The redundancy levels to plan for.
        max_uavs: The UAV budget of every level.

    Returns:
        dict[int, PlacementResult]: The placement of each level.
    """

    sites: list[Point3] = candidate_sites(model.bounds, altitude, spacing)
    targets: list[Point3] = ground_targets(grid, model)
    vis: np.ndarray = visibility_matrix(sites, targets, model)
    results: dict[int, PlacementResult] = {}

    for n_los in n_los_values:
        problem: PlacementProblem = PlacementProblem(
            candidate_sites=sites, targets=targets, n_los=n_los, max_uavs=max_uavs
        )
        results[n_los] = greedy_place(problem, vis)
        logger.info(
            "placement_done",
            n_los=n_los,
            uavs=len(results[n_los].chosen_sites),
            coverage=results[n_los].final_fraction,
        )

    return results
