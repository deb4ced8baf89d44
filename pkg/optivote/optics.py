import math
from typing import Optional, Sequence
from scipy import optimize, stats
import structlog
from optivote.errors import BeamConfigurationError
from optivote.models.optics import (
    BeamParams,
    LinkNoise,
    MrrParams,
    ScanConfig,
    TradeoffPoint,
)

__all__: list[str] = [
    "beam_radius_at",
    "captured_fraction",
    "return_capture_fraction",
    "received_power",
    "outage_probability",
    "pointing_directions",
    "scan_time",
    "waist_for_radius",
    "focused_beam",
    "tradeoff_sweep",
]

logger = structlog.get_logger(__name__)


def beam_radius_at(range_m: float, beam: BeamParams) -> float:
    """Gaussian beam radius at the given distance from the waist.

    Args:
        range_m: The propagation distance (meters).
        beam: The beam.

    Raises:
        ValueError: If the range is negative.

    Returns:
        float: w0 * sqrt(1 + (L / L_R)^2) with L_R = pi * w0^2 / wavelength.
    """

    if range_m < 0:
        raise ValueError("The range cannot be negative.")

    rayleigh: float = math.pi * beam.w0**2 / beam.wavelength
    return beam.w0 * math.hypot(1.0, range_m / rayleigh)


def captured_fraction(
    aperture_radius: float, beam_radius: float, offset: float = 0.0
) -> float:
    """Share of a Gaussian beam's power landing on a circular aperture.

    Off axis, the captured power is the CDF of a noncentral chi-square with two
    degrees of freedom (the Marcum Q function).

    Args:
        aperture_radius: The aperture radius (meters).
        beam_radius: The 1/e^2 beam radius at the aperture (meters).
        offset (Optional): The distance between the beam axis and the aperture
            centre. Default to 0.

    Returns:
        float: The captured fraction in [0, 1].
    """

    if offset == 0.0:
        return -math.expm1(-2.0 * aperture_radius**2 / beam_radius**2)

    scale: float = 4.0 / beam_radius**2
    return float(
        stats.ncx2.cdf(scale * aperture_radius**2, df=2, nc=scale * offset**2)
    )


def return_capture_fraction(range_m: float, beam: BeamParams, mrr: MrrParams) -> float:
    """Share of the retro-reflected beam collected by the receive aperture.

    The return beam leaves the MRR with the aperture as waist and spreads by
    diffraction over the way back.
    """

    waist: float = mrr.aperture_radius
    spread: float = range_m * beam.wavelength / (math.pi * waist**2)
    return captured_fraction(beam.rx_aperture_radius, waist * math.hypot(1.0, spread))


def _link_gain(range_m: float, beam: BeamParams, mrr: MrrParams) -> float:
    return (
        beam.transmit_power
        * mrr.reflectivity
        * mrr.modulation_depth
        * return_capture_fraction(range_m, beam, mrr)
    )


def received_power(
    range_m: float,
    beam: BeamParams,
    mrr: MrrParams,
    noise: Optional[LinkNoise] = None,
    offset: float = 0.0,
) -> float:
    """Mean power of the modulated return at the verifier.

    Args:
        range_m: The verifier to responder distance (meters).
        beam: The interrogating beam.
        mrr: The responder's retro-reflector.
        noise (Optional): Unused by the mean budget, accepted for call symmetry with
            outage_probability.
        offset (Optional): The radial pointing error at the target plane. Default to 0.

    Raises:
        ValueError: If the range is not positive.

    Returns:
        float: The received power (watts).
    """

    if range_m <= 0:
        raise ValueError("The range must be positive.")

    forward: float = captured_fraction(
        mrr.aperture_radius, beam_radius_at(range_m, beam), offset
    )
    return _link_gain(range_m, beam, mrr) * forward


def outage_probability(
    range_m: float, beam: BeamParams, mrr: MrrParams, noise: LinkNoise
) -> float:
    """Probability that the return falls below the detector threshold.

    The radial pointing error follows a Rayleigh law. Since the captured power
    decreases with the error, outage is the tail beyond the error r* at which the
    power equals the threshold: exp(-r*^2 / (2 sigma^2)).

    Args:
        range_m: The verifier to responder distance (meters).
        beam: The interrogating beam.
        mrr: The responder's retro-reflector.
        noise: The pointing jitter and detector threshold.

    Raises:
        ValueError: If the range is not positive.

    Returns:
        float: The outage probability in [0, 1].
    """

    if range_m <= 0:
        raise ValueError("The range must be positive.")

    threshold: float = noise.detector_threshold

    if threshold <= 0:
        return 0.0

    best: float = received_power(range_m, beam, mrr)
    sigma: float = noise.pointing_jitter_sigma

    if sigma == 0:
        return float(best < threshold)

    if best <= threshold:
        return 1.0

    radius: float = beam_radius_at(range_m, beam)
    target: float = threshold / _link_gain(range_m, beam, mrr)

    def excess(r: float) -> float:
        return captured_fraction(mrr.aperture_radius, radius, r) - target

    upper: float = radius

    while excess(upper) > 0:
        upper *= 2.0

    root: float = optimize.brentq(excess, 0.0, upper, xtol=1e-12)
    return math.exp(-(root**2) / (2.0 * sigma**2))


def pointing_directions(config: ScanConfig, wz: float) -> int:
    """Number of beam footprints needed to sweep the region."""

    if wz <= 0:
        raise ValueError("The beam radius must be positive.")

    footprint: float = math.pi * wz**2
    return math.ceil(config.region_area * config.overlap_factor / footprint)


def scan_time(config: ScanConfig, wz: float) -> float:
    """Time for the UAV fleet to sweep the region with beam radius wz.

    Args:
        config: The scan settings.
        wz: The beam radius at the target plane (meters).

    Raises:
        ValueError: If wz is not positive.

    Returns:
        float: ceil(N / num_uavs) * dwell_time, in seconds.
    """

    per_uav: int = math.ceil(pointing_directions(config, wz) / config.num_uavs)
    return per_uav * config.dwell_time


def waist_for_radius(wz: float, range_m: float, wavelength: float) -> float:
    """Collimated waist whose radius at range_m equals wz.

    Raises:
        BeamConfigurationError: If no waist reaches wz at that range.
    """

    c: float = range_m * wavelength / math.pi
    discriminant: float = wz**4 - 4.0 * c**2

    if discriminant < 0:
        raise BeamConfigurationError(
            f"A beam radius of {wz} m is unreachable at {range_m} m, the minimum "
            f"is {math.sqrt(2.0 * c):.6g} m."
        )

    return math.sqrt((wz**2 + math.sqrt(discriminant)) / 2.0)


def focused_beam(beam: BeamParams, wz: float, range_m: float) -> BeamParams:
    """Copy of the beam with the waist set so that its radius at range_m is wz."""

    w0: float = waist_for_radius(wz, range_m, beam.wavelength)
    return beam.model_copy(update={"w0": min(w0, wz), "wz_target": wz})


def tradeoff_sweep(
    wz_values: Sequence[float],
    range_m: float,
    beam: BeamParams,
    mrr: MrrParams,
    noise: LinkNoise,
    config: ScanConfig,
    jitter_ratio: Optional[float] = 0.25,
) -> list[TradeoffPoint]:
    """Evaluate scan time and outage over a range of beam radii.

    Args:
        wz_values: The beam radii at range, strictly increasing.
        range_m: The interrogation range (meters).
        beam: The beam template, its waist is recomputed per point.
        mrr: The responder's retro-reflector.
        noise: The link noise template.
        config: The scan settings.
        jitter_ratio (Optional): The pointing jitter as a fraction of wz. None keeps
            the jitter of `noise`. Default to 0.25.

    Raises:
        ValueError: If wz_values is empty, not positive or not strictly increasing.
        BeamConfigurationError: If a radius is unreachable at the range.

    Returns:
        list[TradeoffPoint]: One point per radius, in input order.
    """

    if not wz_values:
        raise ValueError("The sweep needs at least one beam radius.")

    if any(wz <= 0 for wz in wz_values):
        raise ValueError("Beam radii must be positive.")

    if any(b <= a for a, b in zip(wz_values, wz_values[1:])):
        raise ValueError("Beam radii must be strictly increasing.")

    points: list[TradeoffPoint] = []

    for wz in wz_values:
        point_noise: LinkNoise = noise

        if jitter_ratio is not None:
            point_noise = noise.model_copy(
                update={"pointing_jitter_sigma": jitter_ratio * wz}
            )

        points.append(
            TradeoffPoint(
                wz=wz,
                scan_time=scan_time(config, wz),
                outage=outage_probability(
                    range_m, focused_beam(beam, wz, range_m), mrr, point_noise
                ),
            )
        )
        logger.debug("tradeoff_point", **points[-1].model_dump())

    return points
