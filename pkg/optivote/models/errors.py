import enum
from typing import Optional
from pydantic import BaseModel, ConfigDict

__all__: list[str] = [
    "Rejection",
]


class Rejection(BaseModel):
    """A record the ledger refused.

    Attributes:
        code: The machine-readable rejection code.
        message (Optional): The human-readable detail.
        record_id (Optional): The vote id or target vote id of the refused record.
    """

    class Code(str, enum.Enum):
        BAD_SIGNATURE = "bad-signature"
        REPLAYED_NONCE = "replayed-nonce"
        STALE_TIMESTAMP = "stale-timestamp"
        MALFORMED_RECORD = "malformed-record"
        UNKNOWN_VOTE = "unknown-vote"
        WRONG_ROLE = "wrong-role"
        DUPLICATE_IDENTITY = "duplicate-identity"

    model_config = ConfigDict(frozen=True, extra="forbid")

    code: Code
    message: str = ""
    record_id: Optional[str] = None
