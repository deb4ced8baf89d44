from pathlib import Path
import threading
import time
from typing import Any, Callable, ClassVar, Optional
from pydantic import ValidationError
import structlog
from optivote import codec
from optivote.crypto import Ed25519Scheme, SignatureScheme
from optivote.errors import LedgerCorruptError, LedgerError
from optivote.models import *
from optivote.types import Digest, Role, T

__all__: list[str] = [
    "Ledger",
    "verify_chain",
    "verify_serialized",
]

logger = structlog.get_logger(__name__)


def _wall_clock_ms() -> int:
    return time.time_ns() // 1_000_000


def _check_link(position: int, entry: LedgerEntry, prev: Digest) -> Optional[str]:
    """Tell why the entry does not extend a chain ending with prev, None if it does."""

    if entry.index != position:
        return "index is not contiguous"

    if entry.prev_hash != prev:
        return "prev_hash does not link"

    if entry.entry_hash != codec.entry_hash(prev, entry.payload):
        return "entry_hash does not recompute"

    if isinstance(entry.payload, VoteRecord) and entry.payload.vote_id != (
        codec.compute_vote_id(entry.payload)
    ):
        return "vote_id does not recompute"

    return None


def _check_links(entries: list[LedgerEntry]) -> ChainStatus:
    prev: Digest = ZERO_HASH

    for position, entry in enumerate(entries):
        reason: str | None = _check_link(position, entry, prev)

        if reason:
            return ChainStatus.corrupt(position, reason)

        prev = entry.entry_hash

    return ChainStatus(ok=True)


def verify_chain(ledger: "Ledger") -> ChainStatus:
    """Recompute every hash link of an in-memory ledger.

    Args:
        ledger: The ledger to check.

    Returns:
        ChainStatus: ok, or the first entry whose link or hash does not recompute.
    """

    return _check_links(ledger.entries)


def _parse_lines(data: bytes) -> tuple[list[LedgerEntry], ChainStatus]:
    entries: list[LedgerEntry] = []

    if not data:
        return entries, ChainStatus(ok=True)

    lines: list[bytes] = data.split(b"\n")
    terminated: bool = lines[-1] == b""

    if terminated:
        lines.pop()

    prev: Digest = ZERO_HASH

    for position, line in enumerate(lines):
        try:
            text: str = line.decode("utf8")
            entry: LedgerEntry = LedgerEntry.model_validate_json(text)
        except UnicodeDecodeError:
            return entries, ChainStatus.corrupt(position, "line is not UTF-8")
        except ValidationError as e:
            return entries, ChainStatus.corrupt(
                position, f"line does not parse: {e.errors()[0]['msg']}"
            )

        if entry.model_dump_json() != text:
            return entries, ChainStatus.corrupt(position, "line is not canonical")

        reason: str | None = _check_link(position, entry, prev)

        if reason:
            return entries, ChainStatus.corrupt(position, reason)

        entries.append(entry)
        prev = entry.entry_hash

    if not terminated:
        return entries, ChainStatus.corrupt(len(lines) - 1, "missing final newline")

    return entries, ChainStatus(ok=True)


def verify_serialized(data: bytes) -> ChainStatus:
    """Check a newline-delimited JSON ledger dump.

    Each line must decode, validate and render back to exactly the same bytes before
    its hash links are checked, so that any altered byte is reported.

    Args:
        data: The raw dump.

    Returns:
        ChainStatus: ok, or the first corrupt line index.
    """

    return _parse_lines(data)[1]


class _BaseLedger:
    """The ledger storage and admission rules.

    Attributes:
        freshness_ms: The accepted distance between a vote timestamp and the clock.
    """

    _DEFAULT_FRESHNESS_MS: ClassVar[int] = 300_000

    def __init__(
        self,
        scheme: Optional[SignatureScheme] = None,
        clock: Optional[Callable[[], int]] = None,
        freshness_ms: int = _DEFAULT_FRESHNESS_MS,
    ) -> None:
        """The constructor.

        Args:
            scheme (Optional): The signature scheme records are checked with.
                Default to Ed25519Scheme.
            clock (Optional): The ledger clock, in milliseconds since the epoch.
                Default to the wall clock.
            freshness_ms (Optional): The freshness window of votes. Default to
                _DEFAULT_FRESHNESS_MS.
        """

        self.freshness_ms: int = freshness_ms
        self._scheme: SignatureScheme = scheme or Ed25519Scheme()
        self._clock: Callable[[], int] = clock or _wall_clock_ms
        self._lock: threading.Lock = threading.Lock()
        self._entries: list[LedgerEntry] = []
        self._roles: dict[str, Role] = {}
        self._nonces: set[tuple[str, int]] = set()
        self._votes: dict[str, int] = {}

    @property
    def entries(self) -> list[LedgerEntry]:
        """A consistent snapshot of the chain."""

        with self._lock:
            return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def _append(self, payload: Payload) -> int:
        """Chain the payload to the tip. The caller holds the lock."""

        index: int = len(self._entries)
        prev: Digest = self._entries[-1].entry_hash if self._entries else ZERO_HASH
        self._entries.append(
            LedgerEntry(
                index=index,
                prev_hash=prev,
                payload=payload,
                entry_hash=codec.entry_hash(prev, payload),
            )
        )
        return index

    def _index_payload(self, payload: Payload) -> None:
        if isinstance(payload, VoteRecord):
            self._roles.setdefault(payload.author, Role.USER)
            self._nonces.add((payload.author, payload.nonce))
            self._votes[payload.vote_id] = len(self._entries) - 1
        else:
            self._roles.setdefault(payload.verifier, Role.VERIFIER)

    @staticmethod
    def _coerce(record: Any, model: type[T]) -> T:
        if isinstance(record, model):
            return record

        try:
            if isinstance(record, (str, bytes)):
                return model.model_validate_json(record)

            return model.model_validate(record)
        except ValidationError as e:
            raise LedgerError(Rejection.Code.MALFORMED_RECORD, str(e)) from None

    def _admit_vote(self, vote: VoteRecord) -> None:
        """Apply the vote admission rules. The caller holds the lock.

        Raises:
            LedgerError: On the first violated rule, checked in the order malformed,
                bad signature, wrong role, replayed nonce, stale timestamp.
        """

        if vote.vote_id != codec.compute_vote_id(vote):
            raise LedgerError(
                Rejection.Code.MALFORMED_RECORD, "vote_id does not match the content"
            )

        if not self._scheme.verify(
            vote.author.raw, codec.vote_signing_bytes(vote), vote.signature.raw
        ):
            raise LedgerError(Rejection.Code.BAD_SIGNATURE, "vote signature invalid")

        if self._roles.get(vote.author) is Role.VERIFIER:
            raise LedgerError(
                Rejection.Code.WRONG_ROLE, "verifier keys cannot author votes"
            )

        if (vote.author, vote.nonce) in self._nonces:
            raise LedgerError(
                Rejection.Code.REPLAYED_NONCE, f"nonce {vote.nonce} already used"
            )

        if abs(vote.timestamp - self._clock()) > self.freshness_ms:
            raise LedgerError(
                Rejection.Code.STALE_TIMESTAMP, "timestamp outside the freshness window"
            )

    def _admit_attestation(self, attestation: AttestationRecord) -> None:
        if not self._scheme.verify(
            attestation.verifier.raw,
            codec.attestation_signing_bytes(attestation),
            attestation.signature.raw,
        ):
            raise LedgerError(
                Rejection.Code.BAD_SIGNATURE, "attestation signature invalid"
            )

        if self._roles.get(attestation.verifier) is not Role.VERIFIER:
            raise LedgerError(
                Rejection.Code.WRONG_ROLE, "attestations require the verifier role"
            )

        if attestation.target_vote_id not in self._votes:
            raise LedgerError(
                Rejection.Code.UNKNOWN_VOTE,
                f"vote {attestation.target_vote_id} is not on the ledger",
            )


class Ledger(_BaseLedger):
    """The append-only, hash-chained record log."""

    def register(self, identity: Identity) -> None:
        """Record the role of a participant.

        Args:
            identity: The participant.

        Raises:
            LedgerError: If the key is already registered under another role.
        """

        with self._lock:
            known: Role | None = self._roles.get(identity.public_key)

            if known is not None and known is not identity.role:
                raise LedgerError(
                    Rejection.Code.DUPLICATE_IDENTITY,
                    f"key already registered as {known.value}",
                )

            self._roles[identity.public_key] = identity.role

        logger.debug(
            "identity_registered",
            fingerprint=identity.fingerprint,
            role=identity.role.value,
        )

    def role_of(self, public_key: str) -> Optional[Role]:
        return self._roles.get(public_key)

    def submit_vote(self, vote: VoteRecord | dict[str, Any] | str | bytes) -> int:
        """Append a vote.

        Args:
            vote: The vote, as a record or in its JSON form.

        Raises:
            LedgerError: If the vote is malformed, badly signed, authored by a
                verifier key, replayed or stale.

        Returns:
            int: The index of the new entry.
        """

        record: VoteRecord = self._coerce(vote, VoteRecord)

        with self._lock:
            try:
                self._admit_vote(record)
            except LedgerError as e:
                logger.debug("vote_rejected", code=e.code.value, vote_id=record.vote_id)
                raise

            index: int = self._append(record)
            self._index_payload(record)

        logger.debug("vote_appended", index=index, vote_id=record.vote_id)
        return index

    def submit_attestation(
        self, attestation: AttestationRecord | dict[str, Any] | str | bytes
    ) -> int:
        """Append an attestation.

        Args:
            attestation: The attestation, as a record or in its JSON form.

        Raises:
            LedgerError: If the attestation is malformed or badly signed, if its
                signer is not a verifier or if the target vote is unknown.

        Returns:
            int: The index of the new entry.
        """

        record: AttestationRecord = self._coerce(attestation, AttestationRecord)

        with self._lock:
            try:
                self._admit_attestation(record)
            except LedgerError as e:
                logger.debug(
                    "attestation_rejected",
                    code=e.code.value,
                    target=record.target_vote_id,
                )
                raise

            index: int = self._append(record)
            self._index_payload(record)

        logger.debug(
            "attestation_appended", index=index, target=record.target_vote_id
        )
        return index

    def verify_chain(self) -> ChainStatus:
        return verify_chain(self)

    def query_votes(self, region: Rect, window: TimeWindow) -> list[VoteBundle]:
        """Select votes by claimed location and timestamp.

        Args:
            region: The closed ground rectangle.
            window: The inclusive time window.

        Returns:
            list[VoteBundle]: The matching votes with their attestations, in ledger
                order.
        """

        return self._bundles(
            lambda vote: vote.in_region(region) and window.contains(vote.timestamp)
        )

    def votes(self) -> list[VoteBundle]:
        """Every vote with its attestations, in ledger order."""

        return self._bundles(lambda vote: True)

    def _bundles(self, keep: Callable[[VoteRecord], bool]) -> list[VoteBundle]:
        snapshot: list[LedgerEntry] = self.entries
        attestations: dict[str, list[AttestationRecord]] = {}

        for entry in snapshot:
            if isinstance(entry.payload, AttestationRecord):
                attestations.setdefault(entry.payload.target_vote_id, []).append(
                    entry.payload
                )

        return [
            VoteBundle(
                vote=entry.payload,
                attestations=attestations.get(entry.payload.vote_id, []),
            )
            for entry in snapshot
            if isinstance(entry.payload, VoteRecord) and keep(entry.payload)
        ]

    def dumps(self) -> str:
        """Render the chain as newline-delimited JSON, one entry per line."""

        return "".join(f"{entry.model_dump_json()}\n" for entry in self.entries)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf8")

    @classmethod
    def loads(
        cls,
        data: str | bytes,
        scheme: Optional[SignatureScheme] = None,
        clock: Optional[Callable[[], int]] = None,
        freshness_ms: int = _BaseLedger._DEFAULT_FRESHNESS_MS,
    ) -> "Ledger":
        """Rebuild a ledger from its dump.

        Raises:
            LedgerCorruptError: If the dump does not verify.

        Returns:
            Ledger: The ledger, with its replay and role indexes rebuilt.
        """

        raw: bytes = data.encode("utf8") if isinstance(data, str) else data
        entries, status = _parse_lines(raw)

        if not status.ok:
            raise LedgerCorruptError(status.corrupt_index, status.reason)

        ledger: Ledger = cls(scheme=scheme, clock=clock, freshness_ms=freshness_ms)

        for entry in entries:
            ledger._entries.append(entry)
            ledger._index_payload(entry.payload)

        return ledger

    @classmethod
    def load(cls, path: str | Path, **kwargs: Any) -> "Ledger":
        return cls.loads(Path(path).read_bytes(), **kwargs)
