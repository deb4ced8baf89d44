import math
from typing import Any, Callable
from pydantic import ValidationError
import pytest
from optivote.models.city import *

_SQUARE: list[tuple[float, float]] = [(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)]


class TestPoint3:
    @pytest.mark.parametrize(
        "data, expected, throwable",
        [
            ({"x": 1, "y": 2.5, "z": 0}, Point3(x=1.0, y=2.5, z=0.0), None),
            ({"x": "a", "y": 1}, (".x", ".z"), ValidationError),
            ({"x": math.inf, "y": 0, "z": math.nan}, (".x", ".z"), ValidationError),
            ({"x": 0, "y": 0, "z": 0, "w": 0}, (".w",), ValidationError),
        ],
    )
    def test_init(
        self,
        data: dict[str, Any],
        expected: Point3 | tuple[str, ...],
        throwable: type[ValidationError] | None,
        extract_error_list: Callable[[Any], Any],
        assert_sequences_equals: Callable[[Any], Any],
    ) -> None:
        if throwable:
            try:
                Point3.model_validate(data)
                raise AssertionError(f"Did not raise {throwable}")  # pragma: no cover
            except throwable as e:
                error_list: list[str] = extract_error_list(e)
                assert_sequences_equals(error_list, expected)
        else:
            assert Point3.model_validate(data) == expected

    def test_distance(self) -> None:
        assert Point3.of((0, 0, 0)).distance_to(Point3.of([3, 4, 12])) == 13.0


class TestRect:
    @pytest.mark.parametrize(
        "data, expected, throwable",
        [
            (
                {"min": [0, 0], "max": [10, 5]},
                Rect(min_corner=(0.0, 0.0), max_corner=(10.0, 5.0)),
                None,
            ),
            ({"min": [0, 0], "max": [0, 5]}, ("",), ValidationError),
            ({"min": [3, 3], "max": [1, 1]}, ("",), ValidationError),
            ({}, (".min", ".max"), ValidationError),
        ],
    )
    def test_init(
        self,
        data: dict[str, Any],
        expected: Rect | tuple[str, ...],
        throwable: type[ValidationError] | None,
        extract_error_list: Callable[[Any], Any],
        assert_sequences_equals: Callable[[Any], Any],
    ) -> None:
        if throwable:
            try:
                Rect.model_validate(data)
                raise AssertionError(f"Did not raise {throwable}")  # pragma: no cover
            except throwable as e:
                error_list: list[str] = extract_error_list(e)
                assert_sequences_equals(error_list, expected)
        else:
            assert Rect.model_validate(data) == expected

    def test_geometry(self) -> None:
        rect: Rect = Rect(min=(1, 2), max=(4, 6))

        assert (rect.width, rect.height, rect.area) == (3.0, 4.0, 12.0)
        assert rect.contains(1, 2) and rect.contains(4, 6)
        assert not rect.contains(4.001, 3)
        assert rect.model_dump(by_alias=True) == {"min": (1.0, 2.0), "max": (4.0, 6.0)}


class TestBuilding:
    @pytest.mark.parametrize(
        "data, throwable",
        [
            ({"footprint": _SQUARE, "height": 10}, None),
            ({"footprint": _SQUARE[:2], "height": 10}, ValidationError),
            ({"footprint": _SQUARE[::-1], "height": 10}, ValidationError),
            (
                {"footprint": [(0, 0), (2, 2), (2, 0), (0, 2)], "height": 10},
                ValidationError,
            ),
            ({"footprint": _SQUARE, "height": 0}, ValidationError),
        ],
    )
    def test_init(
        self,
        data: dict[str, Any],
        throwable: type[ValidationError] | None,
        extract_error_list: Callable[[Any], Any],
    ) -> None:
        if throwable:
            try:
                Building.model_validate(data)
                raise AssertionError(f"Did not raise {throwable}")  # pragma: no cover
            except throwable as e:
                assert len(extract_error_list(e)) == 1
        else:
            assert Building.model_validate(data).footprint == _SQUARE

    def test_shape(self) -> None:
        box: Building = Building(footprint=_SQUARE, height=10)
        ell: Building = Building(
            footprint=[(0, 0), (4, 0), (4, 1), (1, 1), (1, 4), (0, 4)], height=10
        )

        assert box.is_box
        assert box.bbox == (1.0, 1.0, 3.0, 3.0)
        assert not ell.is_box
        assert ell.bbox == (0.0, 0.0, 4.0, 4.0)
        assert ell.polygon.area == 7.0


class TestUrbanModel:
    @pytest.mark.parametrize(
        "data, expected, throwable",
        [
            (
                {
                    "bounds": {"min": [0, 0], "max": [5, 5]},
                    "buildings": [{"footprint": _SQUARE, "height": 4}],
                },
                1,
                None,
            ),
            ({"bounds": {"min": [0, 0], "max": [5, 5]}}, 0, None),
            (
                {
                    "bounds": {"min": [0, 0], "max": [2, 2]},
                    "buildings": [{"footprint": _SQUARE, "height": 4}],
                },
                ("",),
                ValidationError,
            ),
            (
                {
                    "version": 2,
                    "bounds": {"min": [0, 0], "max": [5, 5]},
                    "buildings": [{"footprint": _SQUARE, "height": -4}],
                },
                (".version", ".buildings[0].height"),
                ValidationError,
            ),
        ],
    )
    def test_init(
        self,
        data: dict[str, Any],
        expected: int | tuple[str, ...],
        throwable: type[ValidationError] | None,
        extract_error_list: Callable[[Any], Any],
        assert_sequences_equals: Callable[[Any], Any],
    ) -> None:
        if throwable:
            try:
                UrbanModel.model_validate(data)
                raise AssertionError(f"Did not raise {throwable}")  # pragma: no cover
            except throwable as e:
                error_list: list[str] = extract_error_list(e)
                assert_sequences_equals(error_list, expected)
        else:
            assert len(UrbanModel.model_validate(data).buildings) == expected

    def test_vertex_error_context(self) -> None:
        with pytest.raises(ValidationError) as e:
            UrbanModel(
                bounds=Rect(min=(0, 0), max=(5, 5)),
                buildings=[
                    Building(footprint=_SQUARE, height=1),
                    Building(footprint=[(4, 4), (6, 4), (6, 5), (4, 5)], height=1),
                ],
            )

        assert e.value.errors()[0]["type"] == "vertex_out_of_bounds"
        assert e.value.errors()[0]["ctx"] == {"building": 1, "vertex": 1}

    def test_surface_height(self) -> None:
        model: UrbanModel = UrbanModel(
            bounds=Rect(min=(0, 0), max=(5, 5)),
            buildings=[
                Building(footprint=_SQUARE, height=4),
                Building(footprint=[(2, 2), (4, 2), (4, 4), (2, 4)], height=9),
            ],
        )

        assert model.surface_height(0.5, 0.5) == 0.0
        assert model.surface_height(1.5, 1.5) == 4.0
        assert model.surface_height(2.5, 2.5) == 9.0
        assert model.boxes.shape == (2, 4)
        assert model.heights.tolist() == [4.0, 9.0]
        assert model.polygon_indices == []


class TestGroundGrid:
    def test_covering(self) -> None:
        grid: GroundGrid = GroundGrid.covering(Rect(min=(10, 20), max=(100, 75)), 30.0)

        assert (grid.origin, grid.nx, grid.ny, grid.cell_count) == ((10.0, 20.0), 3, 2, 6)
        assert grid.cell_center(2, 1) == (85.0, 65.0)

    @pytest.mark.parametrize(
        "x, y, expected",
        [
            (10.0, 20.0, (0, 0)),
            (40.0, 20.0, (1, 0)),
            (99.9, 79.9, (2, 1)),
            (100.0, 20.0, None),
            (9.99, 30.0, None),
        ],
    )
    def test_cell_of(self, x: float, y: float, expected: tuple[int, int] | None) -> None:
        grid: GroundGrid = GroundGrid(origin=(10.0, 20.0), cell_size=30.0, nx=3, ny=2)

        assert grid.cell_of(x, y) == expected

    def test_indices(self) -> None:
        grid: GroundGrid = GroundGrid(origin=(0.0, 0.0), cell_size=1.0, nx=4, ny=3)

        for index in range(grid.cell_count):
            assert grid.cell_index(*grid.cell_coords(index)) == index

        assert grid.cell_index(1, 2) == 9
