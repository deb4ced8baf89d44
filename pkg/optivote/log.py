import logging
import sys
import structlog

__all__: list[str] = [
    "configure_logging",
]


def configure_logging(level: str = "info") -> None:
    """Install the structlog pipeline used by the command-line entry point.

    Records are rendered as key=value lines on stderr so that they never mix with
    the artifacts written to the output directory.

    Args:
        level (Optional): The minimum level name to emit. Default to "info".
    """

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            structlog.processors.format_exc_info,
            structlog.processors.KeyValueRenderer(
                key_order=["timestamp", "level", "event"], sort_keys=True
            ),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(level.upper())
        ),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
