"""Canonical, portable byte encoding of ledger records.

Every record encodes as a one-byte kind tag followed by its fields in declared order.
Integers are little-endian and fixed width, floats are IEEE-754 binary64, strings are
UTF-8 and every variable-length field is prefixed by its u32 length.
"""

import hashlib
import struct
from typing import Final
from optivote.models.ledger import AttestationRecord, Payload, VoteRecord
from optivote.types import Digest

__all__: list[str] = [
    "vote_signing_bytes",
    "attestation_signing_bytes",
    "payload_bytes",
    "compute_vote_id",
    "entry_hash",
]

_VOTE_TAG: Final[bytes] = b"\x01"
_ATTESTATION_TAG: Final[bytes] = b"\x02"
_U32: Final[struct.Struct] = struct.Struct("<I")
_U64: Final[struct.Struct] = struct.Struct("<Q")
_I64: Final[struct.Struct] = struct.Struct("<q")
_F64X3: Final[struct.Struct] = struct.Struct("<3d")


def _blob(data: bytes) -> bytes:
    return _U32.pack(len(data)) + data


def _text(value: str) -> bytes:
    return _blob(value.encode("utf8"))


def vote_signing_bytes(vote: VoteRecord) -> bytes:
    """The bytes an author signs: every vote field except vote_id and signature."""

    return b"".join(
        (
            _VOTE_TAG,
            _F64X3.pack(*vote.claimed_location.as_tuple()),
            _I64.pack(vote.timestamp),
            _text(vote.label.value),
            _U32.pack(vote.severity),
            _U64.pack(vote.nonce),
            _blob(vote.author.raw),
        )
    )


def attestation_signing_bytes(attestation: AttestationRecord) -> bytes:
    """The bytes a verifier signs: every attestation field except the signature."""

    return b"".join(
        (
            _ATTESTATION_TAG,
            _blob(attestation.target_vote_id.raw),
            _text(attestation.flag.value),
            _text(attestation.tier.value),
            _blob(attestation.verifier.raw),
            _I64.pack(attestation.timestamp),
        )
    )


def payload_bytes(payload: Payload) -> bytes:
    """The complete canonical encoding of a record, as hashed into the chain."""

    if isinstance(payload, VoteRecord):
        return b"".join(
            (
                vote_signing_bytes(payload),
                _blob(payload.vote_id.raw),
                _blob(payload.signature.raw),
            )
        )

    return attestation_signing_bytes(payload) + _blob(payload.signature.raw)


def compute_vote_id(vote: VoteRecord) -> Digest:
    return Digest(hashlib.sha256(vote_signing_bytes(vote)).hexdigest())


def entry_hash(prev_hash: Digest, payload: Payload) -> Digest:
    """SHA-256 of the previous entry hash followed by the canonical payload."""

    return Digest(hashlib.sha256(prev_hash.raw + payload_bytes(payload)).hexdigest())
