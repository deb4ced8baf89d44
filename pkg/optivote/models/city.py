from functools import cached_property
import math
from typing import Literal, Optional
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_core import PydanticCustomError
from shapely.geometry import LinearRing, Point, Polygon

__all__: list[str] = [
    "Point3",
    "Rect",
    "Building",
    "UrbanModel",
    "GroundGrid",
]


class Point3(BaseModel):
    """A point of the local East-North-Up frame.

    Attributes:
        x: The east coordinate (meters).
        y: The north coordinate (meters).
        z: The height above ground (meters).
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    x: float
    y: float
    z: float

    @classmethod
    def of(cls, coords: tuple[float, float, float] | list[float]) -> "Point3":
        x, y, z = coords
        return cls(x=x, y=y, z=z)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def distance_to(self, other: "Point3") -> float:
        return math.dist(self.as_tuple(), other.as_tuple())


class Rect(BaseModel):
    """An axis-aligned rectangle of the ground plane.

    Serialized as {"min": [x, y], "max": [x, y]}.

    Attributes:
        min_corner: The south-west corner.
        max_corner: The north-east corner.
    """

    model_config = ConfigDict(
        frozen=True, extra="forbid", allow_inf_nan=False, populate_by_name=True
    )

    min_corner: tuple[float, float] = Field(alias="min")
    max_corner: tuple[float, float] = Field(alias="max")

    @model_validator(mode="after")
    def check_ordering(self) -> "Rect":
        if not (
            self.min_corner[0] < self.max_corner[0]
            and self.min_corner[1] < self.max_corner[1]
        ):
            raise ValueError("The min corner must be strictly below the max corner.")

        return self

    @property
    def width(self) -> float:
        return self.max_corner[0] - self.min_corner[0]

    @property
    def height(self) -> float:
        return self.max_corner[1] - self.min_corner[1]

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, x: float, y: float) -> bool:
        """Closed-set membership test."""

        return (
            self.min_corner[0] <= x <= self.max_corner[0]
            and self.min_corner[1] <= y <= self.max_corner[1]
        )


class Building(BaseModel):
    """An extruded-footprint building.

    Attributes:
        footprint: The counter-clockwise vertices of the simple footprint polygon.
        height: The roof height (meters).
        polygon (Property): The shapely view of the footprint.
        is_box (Property): Whether the footprint is an axis-aligned rectangle.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    footprint: list[tuple[float, float]]
    height: float = Field(gt=0)

    @field_validator("footprint")
    @classmethod
    def validate_footprint(
        cls, value: list[tuple[float, float]]
    ) -> list[tuple[float, float]]:
        if len(value) < 3:
            raise ValueError("A footprint needs at least 3 vertices.")

        if not Polygon(value).is_valid:
            raise ValueError("The footprint is not a simple polygon.")

        if not LinearRing(value).is_ccw:
            raise ValueError("The footprint must be counter-clockwise.")

        return value

    @cached_property
    def polygon(self) -> Polygon:
        return Polygon(self.footprint)

    @cached_property
    def vertices(self) -> np.ndarray:
        return np.asarray(self.footprint, dtype=float)

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        xs: np.ndarray = self.vertices[:, 0]
        ys: np.ndarray = self.vertices[:, 1]
        return (float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))

    @cached_property
    def is_box(self) -> bool:
        if len(self.footprint) != 4:
            return False

        x0, y0, x1, y1 = self.bbox
        return all(x in (x0, x1) and y in (y0, y1) for x, y in self.footprint)


class UrbanModel(BaseModel):
    """The extruded-polygon city used for every line-of-sight decision.

    Attributes:
        version: The city-model schema version. Always 1.
        bounds: The ground extent of the model.
        buildings (Optional): The buildings of the city.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    version: Literal[1] = 1
    bounds: Rect
    buildings: list[Building] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_within_bounds(self) -> "UrbanModel":
        for index, building in enumerate(self.buildings):
            for vertex, (x, y) in enumerate(building.footprint):
                if not self.bounds.contains(x, y):
                    raise PydanticCustomError(
                        "vertex_out_of_bounds",
                        "Building {building} vertex {vertex} lies outside the bounds.",
                        {"building": index, "vertex": vertex},
                    )

        return self

    @cached_property
    def boxes(self) -> np.ndarray:
        """The (B, 4) array of building bounding boxes (x0, y0, x1, y1)."""

        if not self.buildings:
            return np.empty((0, 4), dtype=float)

        return np.array([building.bbox for building in self.buildings], dtype=float)

    @cached_property
    def heights(self) -> np.ndarray:
        return np.array([building.height for building in self.buildings], dtype=float)

    @cached_property
    def polygon_indices(self) -> list[int]:
        """The indices of the buildings whose footprint is not its own bounding box."""

        return [i for i, building in enumerate(self.buildings) if not building.is_box]

    def surface_height(self, x: float, y: float) -> float:
        """The roof height of the building covering (x, y), 0 on open ground."""

        height: float = 0.0

        for building in self.buildings:
            x0, y0, x1, y1 = building.bbox

            if x0 <= x <= x1 and y0 <= y <= y1:
                if building.polygon.covers(Point(x, y)):
                    height = max(height, building.height)

        return height


class GroundGrid(BaseModel):
    """The discretization of the ground plane.

    Cells enumerate row-major: the cell (ix, iy) has the index iy * nx + ix.

    Attributes:
        origin: The south-west corner of cell (0, 0).
        cell_size: The cell edge (meters).
        nx: The number of cells along x.
        ny: The number of cells along y.
        sample_height (Optional): The height above the surface at which targets are
            evaluated. Default to 1.5 (handheld device).
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    origin: tuple[float, float]
    cell_size: float = Field(gt=0)
    nx: int = Field(ge=1)
    ny: int = Field(ge=1)
    sample_height: float = Field(1.5, ge=0)

    @classmethod
    def covering(
        cls, bounds: Rect, cell_size: float, sample_height: float = 1.5
    ) -> "GroundGrid":
        """Build the smallest grid anchored at the bounds' min corner that covers them."""

        return cls(
            origin=bounds.min_corner,
            cell_size=cell_size,
            nx=max(1, math.ceil(bounds.width / cell_size - 1e-9)),
            ny=max(1, math.ceil(bounds.height / cell_size - 1e-9)),
            sample_height=sample_height,
        )

    @property
    def cell_count(self) -> int:
        return self.nx * self.ny

    def cell_index(self, ix: int, iy: int) -> int:
        return iy * self.nx + ix

    def cell_coords(self, index: int) -> tuple[int, int]:
        return (index % self.nx, index // self.nx)

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.origin[0] + (ix + 0.5) * self.cell_size,
            self.origin[1] + (iy + 0.5) * self.cell_size,
        )

    def cell_of(self, x: float, y: float) -> Optional[tuple[int, int]]:
        """Locate the cell holding (x, y) with right-open intervals.

        Returns:
            tuple[int, int] | None: The (ix, iy) pair, or None outside the grid.
        """

        ix: int = math.floor((x - self.origin[0]) / self.cell_size)
        iy: int = math.floor((y - self.origin[1]) / self.cell_size)

        if 0 <= ix < self.nx and 0 <= iy < self.ny:
            return (ix, iy)

        return None
