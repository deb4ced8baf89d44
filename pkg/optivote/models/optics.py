from pydantic import BaseModel, ConfigDict, Field, model_validator

__all__: list[str] = [
    "BeamParams",
    "MrrParams",
    "LinkNoise",
    "ScanConfig",
    "TradeoffPoint",
]


class BeamParams(BaseModel):
    """The interrogating Gaussian beam.

    Attributes:
        wavelength: The optical wavelength (meters).
        transmit_power: The emitted power (watts).
        w0: The waist radius (meters).
        wz_target: The beam radius at the interrogation range (meters).
        rx_aperture_radius (Optional): The radius of the verifier's receive aperture
            collecting the retro-reflected beam. Default to 0.05.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    wavelength: float = Field(gt=0)
    transmit_power: float = Field(gt=0)
    w0: float = Field(gt=0)
    wz_target: float = Field(gt=0)
    rx_aperture_radius: float = Field(0.05, gt=0)

    @model_validator(mode="after")
    def check_waist(self) -> "BeamParams":
        if self.wz_target < self.w0:
            raise ValueError("The beam radius at range cannot be below the waist.")

        return self


class MrrParams(BaseModel):
    """The modulated retro-reflector carried by a ground responder.

    Attributes:
        aperture_radius: The corner-cube aperture radius (meters).
        reflectivity: The fraction of the captured power reflected back.
        modulation_depth: The fraction of the reflected power carrying data.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    aperture_radius: float = Field(gt=0)
    reflectivity: float = Field(gt=0, le=1)
    modulation_depth: float = Field(gt=0, le=1)


class LinkNoise(BaseModel):
    """The stochastic impairments of one interrogation.

    Attributes:
        pointing_jitter_sigma: The Rayleigh scale of the radial pointing error at the
            target plane (meters).
        detector_threshold: The minimum detectable received power (watts).
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    pointing_jitter_sigma: float = Field(ge=0)
    detector_threshold: float = Field(ge=0)


class ScanConfig(BaseModel):
    """The cooperative area scan.

    Attributes:
        dwell_time (Optional): The time spent per pointing direction (seconds).
            Default to 0.05.
        num_uavs (Optional): The number of UAVs sharing the scan. Default to 20.
        region_area: The area to scan (square meters).
        overlap_factor (Optional): The footprint overlap multiplier. Default to 1.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    dwell_time: float = Field(0.05, gt=0)
    num_uavs: int = Field(20, ge=1)
    region_area: float = Field(gt=0)
    overlap_factor: float = Field(1.0, ge=1)


class TradeoffPoint(BaseModel):
    """One row of the beamwidth sweep."""

    model_config = ConfigDict(frozen=True)

    wz: float
    scan_time: float
    outage: float
