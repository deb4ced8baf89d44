import argparse
import csv
import io
import json
import os
from pathlib import Path
import sys
import tempfile
import time
from typing import Any, Callable, Final, Optional, Sequence
from pydantic import ValidationError
import structlog
from optivote import __version__
from optivote.config import Settings, deep_merge, load_settings
from optivote.errors import OptivoteError
from optivote.fusion import build_crisis_map
from optivote.geometry import dump_urban_model, generate_city, load_urban_model
from optivote.ledger import Ledger, verify_serialized
from optivote.log import configure_logging
from optivote.models import *
from optivote.optics import tradeoff_sweep
from optivote.placement import plan_coverage, uavs_for_coverage
from optivote.protocol import METRICS_HEADER, load_scenario, metrics_row, run_scenario

__all__: list[str] = [
    "main",
    "build_parser",
    "flag_overrides",
]

logger = structlog.get_logger(__name__)

OUT_DIR_ENV: Final[str] = "OPTIVOTE_OUT_DIR"
EXIT_OK: Final[int] = 0
EXIT_CORRUPT: Final[int] = 1
EXIT_ERROR: Final[int] = 2

# Argument dest -> settings key path, per subcommand.
_SETTING_FLAGS: Final[dict[str, dict[str, tuple[str, ...]]]] = {
    "gen-city": {
        "rows": ("city", "rows"),
        "cols": ("city", "cols"),
        "footprint": ("city", "footprint"),
        "height_range": ("city", "height_range"),
    },
    "plan": {
        "n_los": ("placement", "n_los"),
        "max_uavs": ("placement", "max_uavs"),
        "altitude": ("placement", "altitude"),
        "spacing": ("placement", "spacing"),
    },
    "scan-tradeoff": {
        "wz": ("optics", "wz_sweep"),
        "range": ("optics", "range_m"),
    },
}


def flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """The settings keys set explicitly on the command line.

    Only flags the user passed are returned, so an explicit zero still reaches
    validation instead of falling back to the default.

    Returns:
        dict[str, Any]: A nested mapping ready for deep_merge.
    """

    overrides: dict[str, Any] = {}

    for dest, (section, key) in _SETTING_FLAGS.get(args.command, {}).items():
        value: Any = getattr(args, dest, None)

        if value is not None:
            overrides.setdefault(section, {})[key] = value

    return overrides


class _Run:
    """The context of one subcommand: settings, output directory and provenance."""

    def __init__(
        self, command: str, args: argparse.Namespace, settings: Settings
    ) -> None:
        self.command: str = command
        self.args: argparse.Namespace = args
        self.settings: Settings = settings
        self.out_dir: Path = Path(
            args.out_dir or os.environ.get(OUT_DIR_ENV) or "out"
        )
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.seed: Optional[int] = args.seed
        self._started: float = time.perf_counter()

    def write(self, name: str, text: str) -> Path:
        """Write an output file atomically: a temporary sibling is renamed over it."""

        self.out_dir.mkdir(parents=True, exist_ok=True)
        target: Path = self.out_dir / name
        fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.", suffix=".tmp")

        try:
            with os.fdopen(fd, "w", encoding="utf8", newline="") as handle:
                handle.write(text)

            os.replace(tmp, target)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise

        if name not in self.outputs:
            self.outputs.append(name)

        logger.info("output_written", path=str(target))
        return target

    def write_csv(
        self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]
    ) -> None:
        buffer: io.StringIO = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        self.write(name, buffer.getvalue())

    def write_json(self, name: str, data: Any) -> None:
        self.write(name, json.dumps(data, indent=2, sort_keys=True) + "\n")

    def finish(self) -> None:
        manifest: RunManifest = RunManifest(
            version=__version__,
            command=self.command,
            config_hash=self.settings.digest(),
            seed=self.seed,
            inputs=self.inputs,
            outputs=list(self.outputs),
            wall_clock_s=round(time.perf_counter() - self._started, 6),
        )
        self.write_json("manifest.json", manifest.model_dump(mode="json"))


def _gen_city(run: _Run) -> int:
    city = run.settings.city
    seed: int = city.seed if run.seed is None else run.seed
    run.seed = seed
    model: UrbanModel = generate_city(
        city.bounds, city.rows, city.cols, city.footprint, city.height_range, seed
    )
    run.write("city.json", dump_urban_model(model) + "\n")
    return EXIT_OK


def _plan(run: _Run) -> int:
    placement = run.settings.placement
    run.inputs.append(str(run.args.city))
    model: UrbanModel = load_urban_model(run.args.city)
    results: dict[int, PlacementResult] = plan_coverage(
        model,
        run.settings.grid.covering(model.bounds),
        placement.altitude,
        placement.spacing,
        placement.n_los,
        placement.max_uavs,
    )
    rows: list[tuple[int, int, float]] = []

    for n_los, result in results.items():
        rows.extend((k, n_los, fraction) for k, fraction in result.coverage_curve)
        name: str = (
            "placement.json" if len(results) == 1 else f"placement_nlos{n_los}.json"
        )
        run.write(
            name,
            PlacementFile.of(result.chosen_sites).model_dump_json() + "\n",
        )
        logger.info(
            "uavs_for_90_percent",
            n_los=n_los,
            uavs=uavs_for_coverage(result.coverage_curve, 0.9),
        )

    run.write_csv("coverage_curve.csv", ["k", "n_los", "coverage_fraction"], rows)
    return EXIT_OK


def _scan_tradeoff(run: _Run) -> int:
    optics = run.settings.optics
    wz_values: list[float] = optics.wz_sweep
    points: list[TradeoffPoint] = tradeoff_sweep(
        wz_values,
        optics.range_m,
        optics.beam(wz_values[-1]),
        optics.mrr,
        optics.noise(wz_values[-1]),
        optics.scan,
        jitter_ratio=optics.jitter_ratio,
    )
    run.write_csv(
        "tradeoff.csv",
        ["wz_m", "scan_time_s", "outage_probability"],
        [(point.wz, point.scan_time, point.outage) for point in points],
    )
    return EXIT_OK


def _simulate(run: _Run) -> int:
    settings: Settings = run.settings
    run.inputs.append(str(run.args.scenario))
    config: ScenarioConfig = load_scenario(
        run.args.scenario,
        defaults={
            **settings.protocol.model_dump(),
            "freshness_ms": settings.ledger.freshness_ms,
            "weights": settings.trust.model_dump(mode="json"),
        },
        overrides={} if run.seed is None else {"seed": run.seed},
    )
    run.seed = config.seed
    scenario: ScenarioRun = run_scenario(config)
    run.write("ledger.ndjson", scenario.ledger.dumps())
    run.write_csv(
        "metrics.csv", METRICS_HEADER, [metrics_row(r) for r in scenario.reports]
    )
    run.write_json(
        "report.json",
        {
            "epochs": [report.model_dump(mode="json") for report in scenario.reports],
            "summary": scenario.summary.model_dump(mode="json"),
        },
    )
    return EXIT_OK


def _fuse(run: _Run) -> int:
    run.inputs.append(str(run.args.ledger))
    ledger: Ledger = Ledger.load(run.args.ledger)
    weights: TrustWeights = run.settings.trust

    if run.args.weights:
        run.inputs.append(str(run.args.weights))
        weights = TrustWeights.model_validate(
            deep_merge(
                weights.model_dump(mode="json"),
                json.loads(Path(run.args.weights).read_text(encoding="utf8")),
            )
        )

    bounds: Rect = run.settings.city.bounds

    if run.args.city:
        run.inputs.append(str(run.args.city))
        bounds = load_urban_model(run.args.city).bounds

    crisis_map: CrisisMap = build_crisis_map(
        ledger.votes(), weights, run.settings.grid.covering(bounds)
    )
    run.write_csv(
        "crisis_map.csv", ["cell_x", "cell_y", "label", "score"], crisis_map.rows()
    )
    return EXIT_OK


def _verify_ledger(run: _Run) -> int:
    run.inputs.append(str(run.args.ledger))
    status: ChainStatus = verify_serialized(Path(run.args.ledger).read_bytes())

    if not status.ok:
        print(f"corrupt at index {status.corrupt_index}: {status.reason}")
        return EXIT_CORRUPT

    print("ok")
    return EXIT_OK


_COMMANDS: Final[dict[str, Callable[[_Run], int]]] = {
    "gen-city": _gen_city,
    "plan": _plan,
    "scan-tradeoff": _scan_tradeoff,
    "simulate": _simulate,
    "fuse": _fuse,
    "verify-ledger": _verify_ledger,
}


def build_parser() -> argparse.ArgumentParser:
    common: argparse.ArgumentParser = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--config", type=Path, default=None, help="JSON settings file")
    common.add_argument(
        "--out-dir", type=Path, default=None, help=f"output directory (${OUT_DIR_ENV})"
    )
    common.add_argument(
        "--log-level",
        default="info",
        choices=["debug", "info", "warning", "error"],
    )

    parser: argparse.ArgumentParser = argparse.ArgumentParser(
        prog="optivote",
        description="Optically verified crisis votes: city, placement, link, "
        "protocol and fusion tooling.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    gen_city = commands.add_parser("gen-city", parents=[common], help="synthetic city")
    gen_city.add_argument("--rows", type=int)
    gen_city.add_argument("--cols", type=int)
    gen_city.add_argument("--footprint", type=float)
    gen_city.add_argument(
        "--height-range", type=float, nargs=2, metavar=("LOW", "HIGH")
    )

    plan = commands.add_parser("plan", parents=[common], help="UAV placement")
    plan.add_argument("--city", type=Path, required=True)
    plan.add_argument("--n-los", type=int, nargs="+")
    plan.add_argument("--max-uavs", type=int)
    plan.add_argument("--altitude", type=float)
    plan.add_argument("--spacing", type=float)

    scan = commands.add_parser(
        "scan-tradeoff", parents=[common], help="beamwidth tradeoff sweep"
    )
    scan.add_argument("--wz", type=float, nargs="+")
    scan.add_argument("--range", type=float)

    simulate = commands.add_parser("simulate", parents=[common], help="protocol run")
    simulate.add_argument("--scenario", type=Path, required=True)

    fuse = commands.add_parser("fuse", parents=[common], help="crisis map")
    fuse.add_argument("--ledger", type=Path, required=True)
    fuse.add_argument("--weights", type=Path)
    fuse.add_argument("--city", type=Path, help="city file whose bounds the map covers")

    verify = commands.add_parser(
        "verify-ledger", parents=[common], help="ledger dump integrity"
    )
    verify.add_argument("ledger", type=Path)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand.

    Returns:
        int: 0 on success, 1 when verify-ledger finds corruption, 2 on any error.
    """

    args: argparse.Namespace = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    structlog.contextvars.bind_contextvars(command=args.command)

    try:
        run: _Run = _Run(
            args.command, args, load_settings(args.config, flag_overrides(args))
        )

        if args.config:
            run.inputs.append(str(args.config))

        status: int = _COMMANDS[args.command](run)
        run.finish()
    except (OptivoteError, ValidationError, OSError, ValueError) as e:
        logger.error("command_failed", error=str(e), kind=type(e).__name__)
        return EXIT_ERROR
    finally:
        structlog.contextvars.unbind_contextvars("command")

    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
