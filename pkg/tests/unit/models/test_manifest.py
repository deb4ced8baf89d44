from typing import Any, Callable
from pydantic import ValidationError
import pytest
from optivote.models.manifest import RunManifest

_MANIFEST: dict[str, Any] = {
    "version": "1.0.0",
    "command": "simulate",
    "config_hash": "0f" * 32,
    "wall_clock_s": 0.25,
}


class TestRunManifest:
    @pytest.mark.parametrize(
        "data, expected, throwable",
        [
            (_MANIFEST, ("optivote", None, [], []), None),
            (
                {**_MANIFEST, "seed": 7, "inputs": ["s.json"], "outputs": ["ledger.ndjson"]},
                ("optivote", 7, ["s.json"], ["ledger.ndjson"]),
                None,
            ),
            (
                {**_MANIFEST, "config_hash": "0f", "wall_clock_s": -1},
                (".config_hash", ".wall_clock_s"),
                ValidationError,
            ),
            ({"version": "1.0.0"}, (".command", ".config_hash", ".wall_clock_s"), ValidationError),
        ],
    )
    def test_init(
        self,
        data: dict[str, Any],
        expected: tuple[Any, ...],
        throwable: type[ValidationError] | None,
        extract_error_list: Callable[[Any], Any],
        assert_sequences_equals: Callable[[Any], Any],
    ) -> None:
        if throwable:
            try:
                RunManifest.model_validate(data)
                raise AssertionError(f"Did not raise {throwable}")  # pragma: no cover
            except throwable as e:
                error_list: list[str] = extract_error_list(e)
                assert_sequences_equals(error_list, expected)
        else:
            manifest: RunManifest = RunManifest.model_validate(data)

            assert (manifest.tool, manifest.seed, manifest.inputs, manifest.outputs) == expected

    def test_json(self) -> None:
        manifest: RunManifest = RunManifest.model_validate(_MANIFEST)

        assert manifest.model_dump(mode="json")["config_hash"] == "0f" * 32
