from typing import Literal, Optional, TYPE_CHECKING

# To prevent circular import on runtime
if TYPE_CHECKING:  # pragma: no cover
    from optivote.models.errors import Rejection

__all__: list[str] = [
    "OptivoteError",
    "CityModelError",
    "DimensionMismatchError",
    "InstanceTooLargeError",
    "BeamConfigurationError",
    "LedgerError",
    "LedgerCorruptError",
    "MismatchedAttestationError",
    "ConfigurationError",
]


class OptivoteError(Exception):
    ...


class CityModelError(OptivoteError):
    """Raised when a city-model file cannot be parsed or violates the model invariants.

    Attributes:
        kind: "parse" for malformed files, "validation" for invariant violations.
        building_index (Optional): The index of the offending building, if any.
    """

    def __init__(
        self,
        message: str,
        *,
        kind: Literal["parse", "validation"],
        building_index: Optional[int] = None,
    ) -> None:
        super().__init__(message)
        self.kind: Literal["parse", "validation"] = kind
        self.building_index: int | None = building_index


class DimensionMismatchError(OptivoteError):
    ...


class InstanceTooLargeError(OptivoteError):
    ...


class BeamConfigurationError(OptivoteError):
    ...


class LedgerError(OptivoteError):
    """Raised when the ledger refuses a record.

    Attributes:
        code: The machine-readable rejection code.
    """

    def __init__(self, code: "Rejection.Code", message: str = "") -> None:
        super().__init__(f"{code.value}: {message}" if message else code.value)
        self.code: "Rejection.Code" = code
        self.message: str = message


class LedgerCorruptError(OptivoteError):
    """Raised when a serialized ledger does not pass the chain verification.

    Attributes:
        index: The first corrupt entry index.
    """

    def __init__(self, index: int, reason: str) -> None:
        super().__init__(f"Ledger corrupt at index {index}: {reason}")
        self.index: int = index
        self.reason: str = reason


class MismatchedAttestationError(OptivoteError):
    ...


class ConfigurationError(OptivoteError):
    ...
