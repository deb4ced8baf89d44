from typing import Protocol, runtime_checkable
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from optivote.codec import (
    attestation_signing_bytes,
    compute_vote_id,
    vote_signing_bytes,
)
from optivote.models.city import Point3
from optivote.models.identity import Identity
from optivote.models.ledger import ZERO_HASH, AttestationRecord, VoteRecord
from optivote.types import Digest, Flag, HexBlob, Role, SemanticLabel, Tier

__all__: list[str] = [
    "SignatureScheme",
    "Ed25519Scheme",
    "Signer",
]

_PLACEHOLDER: HexBlob = HexBlob("00")


@runtime_checkable
class SignatureScheme(Protocol):
    """The digital-signature contract the ledger relies on."""

    def public_key(self, private: bytes) -> bytes:
        ...

    def sign(self, private: bytes, message: bytes) -> bytes:
        ...

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        ...


class Ed25519Scheme:
    """Ed25519 signatures.

    Private keys are 32-byte seeds and signing is deterministic.
    """

    def public_key(self, private: bytes) -> bytes:
        key: Ed25519PrivateKey = Ed25519PrivateKey.from_private_bytes(private)
        return key.public_key().public_bytes_raw()

    def sign(self, private: bytes, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(private).sign(message)

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
        except (InvalidSignature, ValueError):
            return False

        return True


class Signer:
    """A key holder producing signed ledger records.

    Attributes:
        identity: The public identity of the key holder.
    """

    def __init__(
        self,
        private: bytes,
        role: Role = Role.USER,
        scheme: SignatureScheme | None = None,
    ) -> None:
        """The constructor.

        Args:
            private: The private key material of the scheme.
            role (Optional): The role to claim. Default to Role.USER.
            scheme (Optional): The signature scheme. Default to Ed25519Scheme.
        """

        self._private: bytes = private
        self._scheme: SignatureScheme = scheme or Ed25519Scheme()
        self.identity: Identity = Identity(
            public_key=HexBlob.from_bytes(self._scheme.public_key(private)), role=role
        )

    def _sign(self, message: bytes) -> HexBlob:
        return HexBlob.from_bytes(self._scheme.sign(self._private, message))

    def vote(
        self,
        location: Point3,
        timestamp: int,
        label: SemanticLabel,
        severity: int,
        nonce: int,
    ) -> VoteRecord:
        """Build and sign a vote.

        Returns:
            VoteRecord: The vote with its derived vote_id and signature.
        """

        draft: VoteRecord = VoteRecord(
            vote_id=ZERO_HASH,
            claimed_location=location,
            timestamp=timestamp,
            label=label,
            severity=severity,
            nonce=nonce,
            author=self.identity.public_key,
            signature=_PLACEHOLDER,
        )
        return draft.model_copy(
            update={
                "vote_id": compute_vote_id(draft),
                "signature": self._sign(vote_signing_bytes(draft)),
            }
        )

    def attest(
        self, vote_id: Digest, flag: Flag, tier: Tier, timestamp: int
    ) -> AttestationRecord:
        """Build and sign an attestation of the given vote."""

        draft: AttestationRecord = AttestationRecord(
            target_vote_id=vote_id,
            flag=flag,
            tier=tier,
            verifier=self.identity.public_key,
            timestamp=timestamp,
            signature=_PLACEHOLDER,
        )
        return draft.model_copy(
            update={"signature": self._sign(attestation_signing_bytes(draft))}
        )
