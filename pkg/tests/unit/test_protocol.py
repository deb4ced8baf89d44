import json
import math
from pathlib import Path
from typing import Any, Callable, Optional
import numpy as np
import pytest
from conftest import StubScheme
from optivote.crypto import Signer
from optivote.errors import ConfigurationError
from optivote.models import *
from optivote.optics import outage_probability, received_power
from optivote.protocol import *
from optivote.types import AssignmentPolicy, Flag, GroundTruth, SemanticLabel, Tier

_LINK: dict[str, Any] = {
    "beam": {"wavelength": 1.55e-6, "transmit_power": 0.1, "w0": 0.01, "wz_target": 1.0},
    "mrr": {"aperture_radius": 0.05, "reflectivity": 0.9, "modulation_depth": 0.5},
    "noise": {"pointing_jitter_sigma": 0.0, "detector_threshold": 0.0},
}


def _at(x: float, y: float) -> Point3:
    return Point3(x=x, y=y, z=1.5)


def _honest(count: int, y: float = 200.0) -> list[GroundAgent]:
    return [GroundAgent(true_location=_at(100.0 + 40.0 * i, y)) for i in range(count)]


def _spoofers(count: int) -> list[GroundAgent]:
    return [
        GroundAgent(
            true_location=_at(100.0 + 40.0 * i, 600.0),
            behavior=Spoofer(claimed=_at(100.0 + 40.0 * i, 900.0)),
        )
        for i in range(count)
    ]


def _scenario(
    ground: list[GroundAgent],
    verifiers: Optional[list[VerifierAgent]] = None,
    sites: Optional[list[tuple[float, float, float]]] = None,
    buildings: Optional[list[Building]] = None,
    **kwargs: Any,
) -> ScenarioConfig:
    return ScenarioConfig(
        seed=kwargs.pop("seed", 7),
        city=UrbanModel(
            bounds=Rect(min=(0.0, 0.0), max=(1000.0, 1000.0)), buildings=buildings or []
        ),
        placement=PlacementFile(sites=sites or [(500.0, 500.0, 120.0)]),
        agents=AgentRoster(ground=ground, verifiers=verifiers or [VerifierAgent(site=0)]),
        link=kwargs.pop("link", LinkConfig.model_validate(_LINK)),
        epochs=kwargs.pop("epochs", 1),
        **kwargs,
    )


def _flags(reports: list[EpochReport], flag: Flag) -> int:
    return sum(report.flag_total(flag) for report in reports)


class TestAssignVotes:
    @pytest.fixture
    def votes(self, make_signer: Callable[..., Signer], now: int) -> Callable[..., list[VoteRecord]]:
        def wrapper(*points: Point3) -> list[VoteRecord]:
            return [
                make_signer(1).vote(point, now, SemanticLabel.ACCESS, 2, nonce)
                for nonce, point in enumerate(points)
            ]

        return wrapper

    def test_single_verifier(self, votes: Callable[..., list[VoteRecord]]) -> None:
        batch: list[VoteRecord] = votes(_at(0, 0), _at(900, 900))
        assignment: dict[int, list[VoteRecord]] = assign_votes(
            batch, [Point3(x=5, y=5, z=120)], AssignmentPolicy.NEAREST
        )

        assert assignment == {0: batch}

    def test_tie_goes_to_lowest_index(self, votes: Callable[..., list[VoteRecord]]) -> None:
        stations: list[Point3] = [Point3(x=1000.0 + i, y=1000, z=0) for i in range(6)]
        stations[2] = Point3(x=0, y=0, z=0)
        stations[5] = Point3(x=10, y=0, z=0)
        batch: list[VoteRecord] = votes(Point3(x=5, y=0, z=0))

        for policy in AssignmentPolicy:
            assignment: dict[int, list[VoteRecord]] = assign_votes(batch, stations, policy)

            assert assignment[2] == batch
            assert sum(len(v) for v in assignment.values()) == 1

    def test_min_assignees(self, votes: Callable[..., list[VoteRecord]]) -> None:
        stations: list[Point3] = [
            Point3(x=0, y=0, z=100),
            Point3(x=100, y=0, z=100),
            Point3(x=500, y=0, z=100),
        ]
        batch: list[VoteRecord] = votes(_at(10, 0), _at(450, 0))
        assignment: dict[int, list[VoteRecord]] = assign_votes(
            batch, stations, AssignmentPolicy.NEAREST, min_assignees=2
        )

        assert assignment == {0: [batch[0]], 1: batch, 2: [batch[1]]}
        assert assign_votes(batch, stations[:1], AssignmentPolicy.NEAREST, 2) == {0: batch}

    def test_partition_ignores_altitude(
        self, votes: Callable[..., list[VoteRecord]]
    ) -> None:
        stations: list[Point3] = [Point3(x=0, y=0, z=100), Point3(x=50, y=0, z=0)]
        batch: list[VoteRecord] = votes(Point3(x=10, y=0, z=0))

        assert assign_votes(batch, stations, AssignmentPolicy.NEAREST)[1] == batch
        assert assign_votes(batch, stations, AssignmentPolicy.PARTITION)[0] == batch

    def test_no_verifier(self, votes: Callable[..., list[VoteRecord]]) -> None:
        with pytest.raises(ValueError):
            assign_votes(votes(_at(0, 0)), [], AssignmentPolicy.NEAREST)


class TestRunScenario:
    def test_no_epoch(self, stub_scheme: StubScheme) -> None:
        run: ScenarioRun = run_scenario(_scenario(_honest(3), epochs=0), stub_scheme)

        assert run.reports == []
        assert len(run.ledger) == 0
        assert run.summary == ScenarioSummary()

    def test_all_honest_open_city(self, stub_scheme: StubScheme) -> None:
        run: ScenarioRun = run_scenario(_scenario(_honest(20)), stub_scheme)

        assert run.reports[0].votes_submitted == 20
        assert _flags(run.reports, Flag.VERIFIED) == 20
        assert _flags(run.reports, Flag.UNVERIFIED) == 0
        assert _flags(run.reports, Flag.UNKNOWN) == 0
        assert run.summary.precision == 1.0
        assert run.summary.recall == 1.0

    def test_spoofers_open_city(self, stub_scheme: StubScheme) -> None:
        run: ScenarioRun = run_scenario(
            _scenario(_honest(20) + _spoofers(10)), stub_scheme
        )
        report: EpochReport = run.reports[0]

        assert report.flag_total(Flag.VERIFIED) == 20
        assert report.flag_total(Flag.UNVERIFIED) == 10
        assert report.confusion.false_verified_honest == 0
        assert report.confusion.false_verified == 0
        assert list(report.ground_truth.values()).count(GroundTruth.SPOOFED) == 10

    def test_occluded_vote(self, stub_scheme: StubScheme) -> None:
        tower: Building = Building(
            footprint=[(15.0, 15.0), (100.0, 15.0), (100.0, 100.0), (15.0, 100.0)],
            height=200.0,
        )
        run: ScenarioRun = run_scenario(
            _scenario(
                [GroundAgent(true_location=_at(10.0, 10.0))],
                verifiers=[VerifierAgent(site=0), VerifierAgent(site=1)],
                sites=[(500.0, 500.0, 120.0), (600.0, 600.0, 120.0)],
                buildings=[tower],
                min_assignees=2,
            ),
            stub_scheme,
        )
        (bundle,) = run.ledger.votes()

        assert [a.flag for a in bundle.attestations] == [Flag.UNKNOWN, Flag.UNKNOWN]
        assert run.reports[0].honest_visible == 0

    @pytest.mark.parametrize("min_assignees", [1, 2])
    def test_redundant_assignment_defeats_suppression(
        self, min_assignees: int, stub_scheme: StubScheme
    ) -> None:
        run: ScenarioRun = run_scenario(
            _scenario(
                _honest(20),
                verifiers=[
                    VerifierAgent(site=0, behavior=Suppressor(p_suppress=1.0)),
                    VerifierAgent(site=1),
                ],
                sites=[(250.0, 500.0, 120.0), (750.0, 500.0, 120.0)],
                min_assignees=min_assignees,
            ),
            stub_scheme,
        )
        report: EpochReport = run.reports[0]

        assert report.honest_visible == 20

        if min_assignees == 2:
            assert report.unattested_honest_visible == 0
            assert all(bundle.attestations for bundle in run.ledger.votes())
            assert run.summary.suppression_exposure == 0.0
            assert run.summary.suppressed_fraction == 0.5
        else:
            assert report.suppressed > 0
            assert run.summary.suppressed_fraction > 0.0
            assert run.summary.suppression_exposure > 0.0

    def test_sybil_votes(self, stub_scheme: StubScheme) -> None:
        master: GroundAgent = GroundAgent(
            behavior=SybilMaster(count=5, claimed=_at(700.0, 700.0)),
            label=SemanticLabel.POWER,
        )
        run: ScenarioRun = run_scenario(
            _scenario(_honest(2) + [master], epochs=2), stub_scheme
        )
        truth: list[GroundTruth] = [
            label for report in run.reports for label in report.ground_truth.values()
        ]

        assert truth.count(GroundTruth.SYBIL) == 10
        assert truth.count(GroundTruth.HONEST) == 4
        assert len({b.vote.author for b in run.ledger.votes()}) == 7
        assert _flags(run.reports, Flag.UNVERIFIED) == 10

    def test_sybil_displacement(self, stub_scheme: StubScheme) -> None:
        ground: list[GroundAgent] = [
            GroundAgent(true_location=_at(100.0 + 40.0 * i, 200.0), severity=1 + i % 5)
            for i in range(12)
        ]
        master: GroundAgent = GroundAgent(
            behavior=SybilMaster(count=20, claimed=_at(700.0, 700.0))
        )
        run: ScenarioRun = run_scenario(_scenario(ground + [master]), stub_scheme)

        assert run.summary.sybil_displacement_flat > 0
        assert (
            run.summary.sybil_displacement_weighted <= run.summary.sybil_displacement_flat
        )

    def test_replayer(self, stub_scheme: StubScheme) -> None:
        agents: list[GroundAgent] = _honest(1) + [
            GroundAgent(behavior=Replayer(target=0), true_location=_at(300.0, 300.0))
        ]
        run: ScenarioRun = run_scenario(_scenario(agents, epochs=2), stub_scheme)

        for report in run.reports:
            assert report.votes_submitted == 1
            assert [r.code for r in report.rejections] == [Rejection.Code.REPLAYED_NONCE]

        assert run.ledger.verify_chain().ok

    def test_forger(self, stub_scheme: StubScheme) -> None:
        run: ScenarioRun = run_scenario(
            _scenario(
                _honest(3) + _spoofers(2),
                verifiers=[VerifierAgent(site=0, behavior=Forger(colluders=[3]))],
            ),
            stub_scheme,
        )
        report: EpochReport = run.reports[0]

        assert report.forged == 1
        assert report.flag_total(Flag.VERIFIED) == 4
        assert report.flag_total(Flag.UNVERIFIED) == 1
        assert report.confusion.false_verified == 1
        assert report.confusion.false_verified_honest == 0
        assert run.summary.precision == 0.75

    def test_rf_tier(self, stub_scheme: StubScheme) -> None:
        run: ScenarioRun = run_scenario(
            _scenario(_honest(4), verifiers=[VerifierAgent(site=0, tier=Tier.RF)]),
            stub_scheme,
        )

        assert run.reports[0].attestations[Flag.VERIFIED] == {Tier.OPTICAL: 0, Tier.RF: 4}

    def test_only_new_votes_are_dispatched(self, stub_scheme: StubScheme) -> None:
        run: ScenarioRun = run_scenario(_scenario(_honest(5), epochs=3), stub_scheme)

        assert [r.submitted for r in run.reports] == [5, 5, 5]
        assert all(len(b.attestations) == 1 for b in run.ledger.votes())

    def test_deterministic(self) -> None:
        config: ScenarioConfig = _scenario(
            _honest(6) + _spoofers(2),
            verifiers=[
                VerifierAgent(site=0, behavior=Suppressor(p_suppress=0.5)),
                VerifierAgent(site=1),
            ],
            sites=[(250.0, 500.0, 120.0), (750.0, 500.0, 120.0)],
            epochs=3,
            min_assignees=2,
        )
        first: ScenarioRun = run_scenario(config)
        second: ScenarioRun = run_scenario(config)

        assert first.ledger.dumps() == second.ledger.dumps()
        assert [metrics_row(r) for r in first.reports] == [
            metrics_row(r) for r in second.reports
        ]
        assert first.summary == second.summary

    def test_seed_changes_keys(self, stub_scheme: StubScheme) -> None:
        first: ScenarioRun = run_scenario(_scenario(_honest(2), seed=1), stub_scheme)
        second: ScenarioRun = run_scenario(_scenario(_honest(2), seed=2), stub_scheme)

        assert first.ledger.dumps() != second.ledger.dumps()


def _ring(count: int, radius: float = 200.0) -> list[GroundAgent]:
    return [
        GroundAgent(
            true_location=_at(
                500.0 + radius * math.cos(2.0 * math.pi * i / count),
                500.0 + radius * math.sin(2.0 * math.pi * i / count),
            )
        )
        for i in range(count)
    ]


class TestLinkFailure:
    @pytest.mark.parametrize("sigma", [0.0, 0.5])
    def test_threshold_above_best_power(
        self, sigma: float, stub_scheme: StubScheme
    ) -> None:
        noise: dict[str, float] = {
            "pointing_jitter_sigma": sigma,
            "detector_threshold": 1.0,
        }
        link: LinkConfig = LinkConfig.model_validate({**_LINK, "noise": noise})
        run: ScenarioRun = run_scenario(_scenario(_honest(5), link=link), stub_scheme)
        report: EpochReport = run.reports[0]

        assert report.flag_total(Flag.VERIFIED) == 0
        assert report.flag_total(Flag.UNVERIFIED) == 0
        assert report.flag_total(Flag.UNKNOWN) == 5
        assert report.confusion.unknown_backed == 5
        assert report.confusion.unknown_unbacked == 0
        assert report.honest_visible == 5
        assert report.unattested_honest_visible == 0

    def test_partial_outage_follows_draws(self, stub_scheme: StubScheme) -> None:
        count: int = 16
        site: Point3 = Point3(x=500.0, y=500.0, z=120.0)
        base: LinkConfig = LinkConfig.model_validate(_LINK)
        ground: list[GroundAgent] = _ring(count)
        # Threshold at the power seen one aperture radius off axis, jitter set so
        # that this offset is the Rayleigh median.
        offset: float = base.mrr.aperture_radius
        range_m: float = site.distance_to(ground[0].true_location)
        noise: dict[str, float] = {
            "pointing_jitter_sigma": offset / math.sqrt(2.0 * math.log(2.0)),
            "detector_threshold": received_power(
                range_m, base.beam, base.mrr, offset=offset
            ),
        }
        link: LinkConfig = LinkConfig.model_validate({**_LINK, "noise": noise})
        config: ScenarioConfig = _scenario(ground, link=link, seed=19)
        outages: list[float] = [
            outage_probability(
                site.distance_to(agent.true_location), link.beam, link.mrr, link.noise
            )
            for agent in ground
        ]

        assert all(0.0 < outage < 1.0 for outage in outages)
        assert outages[0] == pytest.approx(0.5, abs=1e-6)

        # Keys for every ground agent and the verifier, one nonce per vote, then one
        # link draw per vote in ledger order.
        rng: np.random.Generator = np.random.default_rng(19)

        for _ in range(count + 1):
            rng.bytes(32)

        for _ in range(count):
            rng.integers(0, 2**64, dtype=np.uint64)

        expected: list[Flag] = [
            Flag.VERIFIED if rng.random() < 1.0 - outage else Flag.UNKNOWN
            for outage in outages
        ]
        run: ScenarioRun = run_scenario(config, stub_scheme)
        report: EpochReport = run.reports[0]

        assert [b.attestations[0].flag for b in run.ledger.votes()] == expected
        assert report.flag_total(Flag.VERIFIED) == expected.count(Flag.VERIFIED)
        assert report.confusion.true_verified == expected.count(Flag.VERIFIED)
        assert report.confusion.unknown_backed == expected.count(Flag.UNKNOWN)
        assert report.flag_total(Flag.UNVERIFIED) == 0


class TestMetricsRow:
    def test_metrics_row(self, stub_scheme: StubScheme) -> None:
        run: ScenarioRun = run_scenario(
            _scenario(_honest(20) + _spoofers(10)), stub_scheme
        )

        assert METRICS_HEADER[0] == "epoch"
        assert metrics_row(run.reports[0]) == [0, 30, 20, 10, 0, 0, 0]


class TestLoadScenario:
    @pytest.fixture
    def scenario_dir(self, tmp_path: Path) -> Path:
        config: ScenarioConfig = _scenario(_honest(2), epochs=2)
        (tmp_path / "city.json").write_text(config.city.model_dump_json(by_alias=True))
        (tmp_path / "placement.json").write_text(config.placement.model_dump_json())
        (tmp_path / "scenario.json").write_text(
            json.dumps(
                {
                    "seed": 3,
                    "city": "city.json",
                    "placement": "placement.json",
                    "agents": config.agents.model_dump(mode="json"),
                    "epochs": 2,
                }
            )
        )
        return tmp_path

    def test_paths_and_defaults(self, scenario_dir: Path) -> None:
        config: ScenarioConfig = load_scenario(
            scenario_dir / "scenario.json",
            defaults={"link": _LINK, "capture_radius": 5.0},
            overrides={"epochs": 4},
        )

        assert config.seed == 3
        assert config.epochs == 4
        assert config.capture_radius == 5.0
        assert config.city.bounds.max_corner == (1000.0, 1000.0)
        assert config.placement.points == [Point3(x=500.0, y=500.0, z=120.0)]

    def test_file_wins_over_defaults(self, scenario_dir: Path) -> None:
        config: ScenarioConfig = load_scenario(
            scenario_dir / "scenario.json", defaults={"link": _LINK, "seed": 99}
        )

        assert config.seed == 3

    @pytest.mark.parametrize(
        "setup",
        [
            lambda d: (d / "city.json").unlink(),
            lambda d: (d / "scenario.json").write_text("{"),
            lambda d: (d / "placement.json").write_text('{"version": 1, "sites": []}'),
        ],
    )
    def test_errors(self, setup: Callable[[Path], Any], scenario_dir: Path) -> None:
        setup(scenario_dir)

        with pytest.raises(ConfigurationError):
            load_scenario(scenario_dir / "scenario.json", defaults={"link": _LINK})

    def test_missing_link(self, scenario_dir: Path) -> None:
        with pytest.raises(ConfigurationError):
            load_scenario(scenario_dir / "scenario.json")
