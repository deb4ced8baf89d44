import hashlib
from importlib import resources
import json
from pathlib import Path
from typing import Any, Literal, Optional
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from optivote.errors import ConfigurationError
from optivote.models import *
from optivote.optics import focused_beam
from optivote.types import Digest

__all__: list[str] = [
    "Settings",
    "load_settings",
    "deep_merge",
]

_DEFAULTS_RESOURCE: str = "defaults.json"


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class CitySettings(_Section):
    bounds: Rect
    rows: int = Field(ge=0)
    cols: int = Field(ge=0)
    footprint: float = Field(gt=0)
    height_range: tuple[float, float]
    seed: int = Field(ge=0)


class GridSettings(_Section):
    cell_size: float = Field(gt=0)
    sample_height: float = Field(ge=0)

    def covering(self, bounds: Rect) -> GroundGrid:
        return GroundGrid.covering(bounds, self.cell_size, self.sample_height)


class PlacementSettings(_Section):
    altitude: float = Field(gt=0)
    spacing: float = Field(gt=0)
    n_los: list[int] = Field(min_length=1)
    max_uavs: int = Field(ge=1)


class OpticsSettings(_Section):
    """The link and scan defaults.

    Attributes:
        wavelength: The beam wavelength (meters).
        transmit_power: The emitted power (watts).
        rx_aperture_radius: The receive aperture radius (meters).
        mrr: The responder's retro-reflector.
        range_m: The interrogation range (meters).
        jitter_ratio: The pointing jitter as a fraction of the beam radius.
        detector_threshold: The minimum detectable power (watts).
        scan: The area scan settings.
        wz_sweep: The beam radii of the tradeoff sweep (meters).
    """

    wavelength: float = Field(gt=0)
    transmit_power: float = Field(gt=0)
    rx_aperture_radius: float = Field(gt=0)
    mrr: MrrParams
    range_m: float = Field(gt=0)
    jitter_ratio: float = Field(ge=0)
    detector_threshold: float = Field(ge=0)
    scan: ScanConfig
    wz_sweep: list[float] = Field(min_length=1)

    def beam(self, wz: float) -> BeamParams:
        """The beam whose radius at range_m is wz."""

        template: BeamParams = BeamParams(
            wavelength=self.wavelength,
            transmit_power=self.transmit_power,
            w0=wz,
            wz_target=wz,
            rx_aperture_radius=self.rx_aperture_radius,
        )
        return focused_beam(template, wz, self.range_m)

    def noise(self, wz: float) -> LinkNoise:
        return LinkNoise(
            pointing_jitter_sigma=self.jitter_ratio * wz,
            detector_threshold=self.detector_threshold,
        )


class LedgerSettings(_Section):
    freshness_ms: int = Field(ge=0)


class ProtocolSettings(_Section):
    capture_radius: float = Field(ge=0)
    min_assignees: int = Field(ge=1)
    epoch_ms: int = Field(gt=0)


class Settings(_Section):
    """The effective configuration of a run.

    Attributes:
        version: The configuration schema version. Always 1.
    """

    version: Literal[1] = 1
    city: CitySettings
    grid: GridSettings
    placement: PlacementSettings
    optics: OpticsSettings
    trust: TrustWeights
    ledger: LedgerSettings
    protocol: ProtocolSettings

    def canonical_json(self) -> str:
        return json.dumps(
            self.model_dump(mode="json", by_alias=True),
            sort_keys=True,
            separators=(",", ":"),
        )

    def digest(self) -> Digest:
        """The SHA-256 of the sorted-key compact JSON of the settings."""

        return Digest(hashlib.sha256(self.canonical_json().encode("utf8")).hexdigest())


def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Merge override into a copy of base, recursing into nested mappings."""

    merged: dict[str, Any] = dict(base)

    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value

    return merged


def _defaults() -> dict[str, Any]:
    return json.loads(
        resources.files("optivote").joinpath(_DEFAULTS_RESOURCE).read_text("utf8")
    )


def load_settings(
    path: Optional[str | Path] = None, overrides: Optional[dict[str, Any]] = None
) -> Settings:
    """Build the effective settings.

    Args:
        path (Optional): A JSON document merged over the shipped defaults.
        overrides (Optional): Individual keys merged last, e.g. from CLI flags.

    Raises:
        ConfigurationError: If the document cannot be read or the result is invalid.

    Returns:
        Settings: The validated settings.
    """

    data: dict[str, Any] = _defaults()

    if path is not None:
        try:
            user: Any = json.loads(Path(path).read_text(encoding="utf8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot read configuration {path}: {e}") from None

        if not isinstance(user, dict):
            raise ConfigurationError(f"Configuration {path} is not a JSON object.")

        data = deep_merge(data, user)

    if overrides:
        data = deep_merge(data, overrides)

    try:
        return Settings.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from None
