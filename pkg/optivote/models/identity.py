from functools import cached_property
import hashlib
from pydantic import BaseModel, ConfigDict
from optivote.types import HexBlob, Role

__all__: list[str] = [
    "Identity",
]


class Identity(BaseModel):
    """A ledger participant.

    Attributes:
        public_key: The hexadecimal rendering of the participant's public key.
        role: The participant's role.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    public_key: HexBlob
    role: Role = Role.USER

    @cached_property
    def key_bytes(self) -> bytes:
        return self.public_key.raw

    @cached_property
    def fingerprint(self) -> str:
        """Short, stable label of the key for logs and reports.

        Returns:
            str: The first 16 hexadecimal digits of the SHA-256 of the key.
        """

        return hashlib.sha256(self.key_bytes).hexdigest()[:16]
