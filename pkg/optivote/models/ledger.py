from typing import Optional, Union
from pydantic import BaseModel, ConfigDict, Field, model_validator
from optivote.models.city import Point3, Rect
from optivote.types import Digest, Flag, HexBlob, SemanticLabel, Tier

__all__: list[str] = [
    "VoteRecord",
    "AttestationRecord",
    "Payload",
    "LedgerEntry",
    "TimeWindow",
    "ChainStatus",
    "VoteBundle",
    "ZERO_HASH",
]

ZERO_HASH: Digest = Digest("0" * 64)


class VoteRecord(BaseModel):
    """A signed, geotagged and labeled need claim.

    Attributes:
        vote_id: The SHA-256 of the record's signing bytes.
        claimed_location: Where the author says the need is.
        timestamp: The emission time, in milliseconds since the epoch.
        label: The need category.
        severity: The urgency, from 1 to 5.
        nonce: A 64-bit value unique per author.
        author: The hexadecimal public key of the author.
        signature: The author's signature over the signing bytes.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    vote_id: Digest
    claimed_location: Point3
    timestamp: int = Field(ge=-(2**63), lt=2**63)
    label: SemanticLabel
    severity: int = Field(ge=1, le=5)
    nonce: int = Field(ge=0, lt=2**64)
    author: HexBlob
    signature: HexBlob

    def in_region(self, region: Rect) -> bool:
        return region.contains(self.claimed_location.x, self.claimed_location.y)


class AttestationRecord(BaseModel):
    """A verifier's signed location flag bound to one vote.

    Attributes:
        target_vote_id: The id of the attested vote.
        flag: The verification outcome.
        tier: The verification channel.
        verifier: The hexadecimal public key of the verifier.
        timestamp: The emission time, in milliseconds since the epoch.
        signature: The verifier's signature over the signing bytes.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    target_vote_id: Digest
    flag: Flag
    tier: Tier
    verifier: HexBlob
    timestamp: int = Field(ge=-(2**63), lt=2**63)
    signature: HexBlob


# Members are told apart by their (forbidden extra) field sets.
Payload = Union[VoteRecord, AttestationRecord]


class LedgerEntry(BaseModel):
    """One link of the hash chain.

    Attributes:
        index: The position in the chain, from 0.
        prev_hash: The entry_hash of the previous entry, zeros for the first one.
        payload: The logged record.
        entry_hash: SHA-256(prev_hash || canonical payload bytes).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    index: int = Field(ge=0)
    prev_hash: Digest
    payload: Payload
    entry_hash: Digest


class TimeWindow(BaseModel):
    """An inclusive interval of ledger timestamps (milliseconds)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    start_ms: int
    end_ms: int

    @model_validator(mode="after")
    def check_ordering(self) -> "TimeWindow":
        if self.start_ms > self.end_ms:
            raise ValueError("The window must start before it ends.")

        return self

    def contains(self, timestamp: int) -> bool:
        return self.start_ms <= timestamp <= self.end_ms


class ChainStatus(BaseModel):
    """The outcome of a chain verification.

    Attributes:
        ok: Whether the whole chain verifies.
        corrupt_index (Optional): The first entry failing verification.
        reason (Optional): Why that entry fails.
    """

    model_config = ConfigDict(frozen=True)

    ok: bool
    corrupt_index: Optional[int] = None
    reason: str = ""

    @classmethod
    def corrupt(cls, index: int, reason: str) -> "ChainStatus":
        return cls(ok=False, corrupt_index=index, reason=reason)


class VoteBundle(BaseModel):
    """A vote with every attestation logged against it, in ledger order."""

    model_config = ConfigDict(frozen=True)

    vote: VoteRecord
    attestations: list[AttestationRecord] = Field(default_factory=list)
