import enum
import re
from typing import Any, ClassVar, TypeVar
from pydantic import BaseModel, GetCoreSchemaHandler
from pydantic_core import core_schema

__all__: list[str] = [
    "AssignmentPolicy",
    "Digest",
    "Flag",
    "GroundTruth",
    "HexBlob",
    "Role",
    "SemanticLabel",
    "T",
    "Tier",
]

T = TypeVar("T", bound=BaseModel)


class SemanticLabel(str, enum.Enum):
    MEDICAL = "medical"
    POWER = "power"
    ACCESS = "access"
    TRAPPED = "trapped"
    GAS_LEAK = "gas_leak"
    COMM_BLACKOUT = "comm_blackout"
    SUSPICIOUS_ACTIVITY = "suspicious_activity"


class Flag(str, enum.Enum):
    VERIFIED = "verified"
    UNVERIFIED = "unverified"
    UNKNOWN = "unknown"


class Tier(str, enum.Enum):
    OPTICAL = "optical"
    RF = "rf"


class Role(str, enum.Enum):
    USER = "user"
    VERIFIER = "verifier"
    AGENCY = "agency"


class AssignmentPolicy(str, enum.Enum):
    NEAREST = "nearest"
    PARTITION = "partition"


class GroundTruth(str, enum.Enum):
    HONEST = "honest"
    SPOOFED = "spoofed"
    SYBIL = "sybil"


class HexBlob(str):
    """Lowercase hexadecimal rendering of an opaque byte string.

    Uppercase digits are refused so that a serialized value has exactly one spelling.
    """

    _PATTERN: ClassVar[re.Pattern] = re.compile(r"(?:[0-9a-f]{2})+")

    def raise_for_validation(self) -> None:
        """Should be called after the instantiation of the class to check the validity
        of the hexadecimal string.

        Raises:
            ValueError: If the string does not fit the pattern matching.
        """

        if not self._PATTERN.fullmatch(self):
            raise ValueError(
                f"The {type(self).__name__} value should follow the "
                f"pattern {self._PATTERN.pattern}"
            )

    @property
    def raw(self) -> bytes:
        return bytes.fromhex(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> "HexBlob":
        return cls(data.hex())

    @classmethod
    def _validate(cls, value: str) -> "HexBlob":
        hex_value: HexBlob = cls(value)
        hex_value.raise_for_validation()
        return hex_value

    @classmethod
    def __get_pydantic_core_schema__(
        cls, source: type[Any], handler: GetCoreSchemaHandler
    ) -> core_schema.CoreSchema:
        return core_schema.no_info_after_validator_function(
            cls._validate,
            core_schema.str_schema(),
            serialization=core_schema.plain_serializer_function_ser_schema(str),
        )


class Digest(HexBlob):
    """A SHA-256 digest, 64 lowercase hexadecimal digits."""

    _PATTERN: ClassVar[re.Pattern] = re.compile(r"[0-9a-f]{64}")
