import json
from pathlib import Path
from typing import Any, Final, Sequence
import numpy as np
from pydantic import ValidationError
import structlog
from optivote.errors import CityModelError
from optivote.models.city import Building, GroundGrid, Point3, Rect, UrbanModel

__all__: list[str] = [
    "load_urban_model",
    "parse_urban_model",
    "dump_urban_model",
    "has_los",
    "visibility_matrix",
    "segments_clear",
    "ground_targets",
    "candidate_sites",
    "generate_city",
]

logger = structlog.get_logger(__name__)

# Tolerance on lengths (meters) and heights.
EPSILON: Final[float] = 1e-9
# Upper bound of (pair, building) cells evaluated at once by the broad phase.
_CHUNK_CELLS: Final[int] = 1 << 21


def parse_urban_model(text: str) -> UrbanModel:
    """Parse and validate a city-model document.

    Args:
        text: The UTF-8 JSON document.

    Raises:
        CityModelError: If the document is malformed or violates a model invariant.

    Returns:
        UrbanModel: The validated model.
    """

    try:
        data: Any = json.loads(text)
    except json.JSONDecodeError as e:
        raise CityModelError(f"Malformed city file: {e}", kind="parse") from None

    try:
        return UrbanModel.model_validate(data)
    except ValidationError as e:
        error: dict[str, Any] = e.errors()[0]
        index: int | None = None
        loc: tuple[Any, ...] = error["loc"]

        if len(loc) >= 2 and loc[0] == "buildings" and isinstance(loc[1], int):
            index = loc[1]
        elif "building" in error.get("ctx", {}):
            index = error["ctx"]["building"]

        where: str = f"building {index}: " if index is not None else ""
        raise CityModelError(
            f"Invalid city model, {where}{error['msg']}",
            kind="validation",
            building_index=index,
        ) from None


def load_urban_model(path: str | Path) -> UrbanModel:
    """Load a city-model file.

    Args:
        path: The city JSON file.

    Raises:
        CityModelError: If the file is malformed or violates a model invariant.

    Returns:
        UrbanModel: The validated model.
    """

    try:
        text: str = Path(path).read_text(encoding="utf8")
    except UnicodeDecodeError as e:
        raise CityModelError(f"City file is not UTF-8: {e}", kind="parse") from None

    model: UrbanModel = parse_urban_model(text)
    logger.debug("city_loaded", path=str(path), buildings=len(model.buildings))
    return model


def dump_urban_model(model: UrbanModel) -> str:
    """Render a model in the canonical city-file form."""

    return json.dumps(
        model.model_dump(mode="json", by_alias=True), separators=(",", ":")
    )


def _as_points(points: Sequence[Point3]) -> np.ndarray:
    return np.array([p.as_tuple() for p in points], dtype=float).reshape(-1, 3)


def _box_candidates(a: np.ndarray, b: np.ndarray, model: UrbanModel) -> np.ndarray:
    """Slab-clip every segment against every building bounding box.

    Args:
        a: The (P, 3) segment starts.
        b: The (P, 3) segment ends.
        model: The city.

    Returns:
        np.ndarray: The (P, B) mask of segments whose open part crosses the interior
            of a bounding box below the roof.
    """

    boxes: np.ndarray = model.boxes
    heights: np.ndarray = model.heights
    d: np.ndarray = b - a
    length: np.ndarray = np.linalg.norm(d, axis=1)[:, None]
    t_in: np.ndarray = np.zeros((a.shape[0], boxes.shape[0]))
    t_out: np.ndarray = np.ones((a.shape[0], boxes.shape[0]))
    inside: np.ndarray = np.ones((a.shape[0], boxes.shape[0]), dtype=bool)

    with np.errstate(divide="ignore", invalid="ignore"):
        for axis in (0, 1):
            lo: np.ndarray = boxes[None, :, axis]
            hi: np.ndarray = boxes[None, :, axis + 2]
            start: np.ndarray = a[:, axis, None]
            delta: np.ndarray = d[:, axis, None]
            parallel: np.ndarray = np.abs(delta) <= EPSILON * np.maximum(length, 1.0)
            t1: np.ndarray = (lo - start) / delta
            t2: np.ndarray = (hi - start) / delta
            near: np.ndarray = np.where(parallel, -np.inf, np.minimum(t1, t2))
            far: np.ndarray = np.where(parallel, np.inf, np.maximum(t1, t2))
            inside &= ~parallel | ((lo + EPSILON < start) & (start < hi - EPSILON))
            t_in = np.maximum(t_in, near)
            t_out = np.minimum(t_out, far)

    overlap: np.ndarray = inside & ((t_out - t_in) * length > EPSILON)
    z_in: np.ndarray = a[:, 2, None] + t_in * d[:, 2, None]
    z_out: np.ndarray = a[:, 2, None] + t_out * d[:, 2, None]
    low: np.ndarray = np.minimum(z_in, z_out)
    high: np.ndarray = np.maximum(z_in, z_out)
    return overlap & (low < heights[None, :] - EPSILON) & (high > EPSILON)


def _strictly_inside(
    px: np.ndarray, py: np.ndarray, vertices: np.ndarray
) -> np.ndarray:
    """Even-odd containment that excludes points within EPSILON of the boundary."""

    vx: np.ndarray = vertices[:, 0]
    vy: np.ndarray = vertices[:, 1]
    wx: np.ndarray = np.roll(vx, -1)
    wy: np.ndarray = np.roll(vy, -1)
    x: np.ndarray = px[..., None]
    y: np.ndarray = py[..., None]

    with np.errstate(divide="ignore", invalid="ignore"):
        straddles: np.ndarray = (vy > y) != (wy > y)
        cross_x: np.ndarray = (wx - vx) * (y - vy) / (wy - vy) + vx
        crossings: np.ndarray = np.count_nonzero(straddles & (x < cross_x), axis=-1)

    ex: np.ndarray = wx - vx
    ey: np.ndarray = wy - vy
    edge_sq: np.ndarray = ex * ex + ey * ey
    u: np.ndarray = np.clip(((x - vx) * ex + (y - vy) * ey) / edge_sq, 0.0, 1.0)
    gap: np.ndarray = np.hypot(vx + u * ex - x, vy + u * ey - y).min(axis=-1)
    return (crossings % 2 == 1) & (gap > EPSILON)


def _polygon_blocks(a: np.ndarray, b: np.ndarray, building: Building) -> np.ndarray:
    """Exact test of segments against one extruded simple polygon.

    The segment is split at its crossings with the footprint edges; a piece whose
    midpoint lies strictly inside the footprint is inside along its whole open span,
    and blocks when its altitude range dips below the roof.
    """

    vertices: np.ndarray = building.vertices
    p: np.ndarray = a[:, :2]
    d: np.ndarray = b[:, :2] - p
    w: np.ndarray = np.roll(vertices, -1, axis=0) - vertices
    diff: np.ndarray = vertices[None, :, :] - p[:, None, :]
    denom: np.ndarray = d[:, None, 0] * w[None, :, 1] - d[:, None, 1] * w[None, :, 0]

    with np.errstate(divide="ignore", invalid="ignore"):
        t: np.ndarray = (
            diff[..., 0] * w[None, :, 1] - diff[..., 1] * w[None, :, 0]
        ) / denom
        u: np.ndarray = (
            diff[..., 0] * d[:, None, 1] - diff[..., 1] * d[:, None, 0]
        ) / denom

    hit: np.ndarray = (
        (np.abs(denom) > EPSILON)
        & (t > 0.0)
        & (t < 1.0)
        & (u >= -EPSILON)
        & (u <= 1.0 + EPSILON)
    )
    cuts: np.ndarray = np.sort(
        np.concatenate(
            [
                np.zeros((a.shape[0], 1)),
                np.where(hit, t, np.nan),
                np.ones((a.shape[0], 1)),
            ],
            axis=1,
        ),
        axis=1,
    )
    t0: np.ndarray = cuts[:, :-1]
    t1: np.ndarray = cuts[:, 1:]
    length: np.ndarray = np.linalg.norm(b - a, axis=1)[:, None]
    piece: np.ndarray = (
        np.isfinite(t0) & np.isfinite(t1) & ((t1 - t0) * length > EPSILON)
    )
    mid: np.ndarray = np.where(piece, (t0 + t1) / 2.0, 0.0)
    inside: np.ndarray = _strictly_inside(
        p[:, 0, None] + mid * d[:, 0, None],
        p[:, 1, None] + mid * d[:, 1, None],
        vertices,
    )
    dz: np.ndarray = (b[:, 2] - a[:, 2])[:, None]
    z0: np.ndarray = a[:, 2, None] + np.where(piece, t0, 0.0) * dz
    z1: np.ndarray = a[:, 2, None] + np.where(piece, t1, 0.0) * dz
    below: np.ndarray = (np.minimum(z0, z1) < building.height - EPSILON) & (
        np.maximum(z0, z1) > EPSILON
    )
    return np.any(piece & inside & below, axis=1)


def segments_clear(a: np.ndarray, b: np.ndarray, model: UrbanModel) -> np.ndarray:
    """Batched line-of-sight test of the segments (a[i], b[i]).

    Every pair is evaluated independently, so the result of a pair does not depend on
    the batch it was evaluated in.

    Args:
        a: The (P, 3) segment starts.
        b: The (P, 3) segment ends.
        model: The city.

    Returns:
        np.ndarray: The (P,) boolean mask, True where the open segment meets no
            building interior.
    """

    clear: np.ndarray = np.ones(a.shape[0], dtype=bool)

    if not model.buildings or a.shape[0] == 0:
        return clear

    polygon_indices: list[int] = model.polygon_indices
    box_mask: np.ndarray = np.ones(len(model.buildings), dtype=bool)
    box_mask[polygon_indices] = False
    step: int = max(1, _CHUNK_CELLS // len(model.buildings))

    for start in range(0, a.shape[0], step):
        sa: np.ndarray = a[start : start + step]
        sb: np.ndarray = b[start : start + step]
        candidates: np.ndarray = _box_candidates(sa, sb, model)
        blocked: np.ndarray = np.any(candidates[:, box_mask], axis=1)

        for index in polygon_indices:
            rows: np.ndarray = np.flatnonzero(candidates[:, index] & ~blocked)

            if rows.size:
                blocked[rows] |= _polygon_blocks(
                    sa[rows], sb[rows], model.buildings[index]
                )

        clear[start : start + step] = ~blocked

    return clear


def has_los(a: Point3, b: Point3, model: UrbanModel) -> bool:
    """Tell whether the open segment (a, b) avoids every building interior.

    Grazing contact with a wall, an edge or a roof counts as line of sight.

    Args:
        a: The first end point.
        b: The second end point.
        model: The city.

    Raises:
        ValueError: If both end points coincide.

    Returns:
        bool: True if the segment is unobstructed.
    """

    if a == b:
        raise ValueError("Line of sight is undefined between coincident points.")

    return bool(segments_clear(_as_points([a]), _as_points([b]), model)[0])


def visibility_matrix(
    sites: Sequence[Point3], targets: Sequence[Point3], model: UrbanModel
) -> np.ndarray:
    """Evaluate has_los for every (site, target) pair.

    Args:
        sites: The viewpoints (rows).
        targets: The ground targets (columns).
        model: The city.

    Raises:
        ValueError: If either list is empty.

    Returns:
        np.ndarray: The (len(sites), len(targets)) boolean matrix.
    """

    if not sites or not targets:
        raise ValueError("Sites and targets must be non-empty.")

    site_xyz: np.ndarray = _as_points(sites)
    target_xyz: np.ndarray = _as_points(targets)
    n_targets: int = target_xyz.shape[0]
    matrix: np.ndarray = np.empty((site_xyz.shape[0], n_targets), dtype=bool)

    for row, site in enumerate(site_xyz):
        matrix[row] = segments_clear(
            np.broadcast_to(site, (n_targets, 3)), target_xyz, model
        )

    logger.debug(
        "visibility_matrix",
        sites=len(sites),
        targets=n_targets,
        visible=int(matrix.sum()),
    )
    return matrix


def ground_targets(grid: GroundGrid, model: UrbanModel) -> list[Point3]:
    """Build one target per grid cell, in row-major order.

    A cell centre on open ground is sampled at the grid sample height, a centre covered
    by a footprint is sampled that high above the roof.
    """

    targets: list[Point3] = []

    for iy in range(grid.ny):
        for ix in range(grid.nx):
            x, y = grid.cell_center(ix, iy)
            z: float = model.surface_height(x, y) + grid.sample_height
            targets.append(Point3(x=x, y=y, z=z))

    return targets


def candidate_sites(bounds: Rect, altitude: float, spacing: float) -> list[Point3]:
    """Lay a horizontal grid of hover points over the bounds.

    Args:
        bounds: The area to cover.
        altitude: The hover altitude (meters).
        spacing: The distance between neighbouring hover points (meters).

    Raises:
        ValueError: If the altitude or the spacing is not positive.

    Returns:
        list[Point3]: The hover points, row-major.
    """

    if altitude <= 0 or spacing <= 0:
        raise ValueError("Altitude and spacing must be positive.")

    xs: np.ndarray = np.arange(
        bounds.min_corner[0] + spacing / 2, bounds.max_corner[0], spacing
    )
    ys: np.ndarray = np.arange(
        bounds.min_corner[1] + spacing / 2, bounds.max_corner[1], spacing
    )
    return [Point3(x=float(x), y=float(y), z=altitude) for y in ys for x in xs]


def generate_city(
    bounds: Rect,
    rows: int,
    cols: int,
    footprint: float,
    height_range: tuple[float, float],
    seed: int,
) -> UrbanModel:
    """Generate a Manhattan-grid city.

    Building (r, c) is the square of side `footprint` centred on the block
    (min_x + (c + 1/2) * width / cols, min_y + (r + 1/2) * height / rows). Buildings are
    emitted row-major and their heights drawn in that order.

    Args:
        bounds: The extent of the city.
        rows: The number of building rows.
        cols: The number of building columns.
        footprint: The side of every building (meters).
        height_range: The (low, high) interval of the uniform building heights.
        seed: The seed of the height draws.

    Raises:
        ValueError: If a dimension is invalid (invalid-dimension).

    Returns:
        UrbanModel: The generated city.
    """

    low, high = height_range

    if rows < 0 or cols < 0:
        raise ValueError("invalid-dimension: rows and cols must be non-negative.")

    if rows == 0 or cols == 0:
        return UrbanModel(bounds=bounds, buildings=[])

    pitch_x: float = bounds.width / cols
    pitch_y: float = bounds.height / rows

    if footprint <= 0 or footprint >= min(pitch_x, pitch_y):
        raise ValueError(
            "invalid-dimension: the footprint must be positive and leave a street."
        )

    if low <= 0 or low > high:
        raise ValueError("invalid-dimension: the height range must be positive.")

    rng: np.random.Generator = np.random.default_rng(seed)
    half: float = footprint / 2
    buildings: list[Building] = []

    for r in range(rows):
        for c in range(cols):
            cx: float = bounds.min_corner[0] + (c + 0.5) * pitch_x
            cy: float = bounds.min_corner[1] + (r + 0.5) * pitch_y
            height: float = round(float(rng.uniform(low, high)), 1)
            buildings.append(
                Building(
                    footprint=[
                        (cx - half, cy - half),
                        (cx + half, cy - half),
                        (cx + half, cy + half),
                        (cx - half, cy + half),
                    ],
                    height=max(height, 0.1),
                )
            )

    logger.info("city_generated", rows=rows, cols=cols, buildings=len(buildings))
    return UrbanModel(bounds=bounds, buildings=buildings)
