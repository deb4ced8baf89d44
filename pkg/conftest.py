import hashlib
from typing import Any, Callable, Final, Iterable
from pydantic import ValidationError
import pytest
from optivote.crypto import Signer
from optivote.ledger import Ledger
from optivote.models import *
from optivote.types import Role

_NOW: Final[int] = 1_700_000_000_000


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line(
        "markers", "slow: desk-scale end-to-end runs (deselect with -m 'not slow')"
    )


class StubScheme:
    """Deterministic keyed-hash stand-in for a signature scheme."""

    def public_key(self, private: bytes) -> bytes:
        return hashlib.sha256(b"pub" + private).digest()

    def sign(self, private: bytes, message: bytes) -> bytes:
        return hashlib.sha256(self.public_key(private) + message).digest()

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        return hashlib.sha256(public + message).digest() == signature


@pytest.fixture
def stub_scheme() -> StubScheme:
    return StubScheme()


@pytest.fixture
def now() -> int:
    return _NOW


@pytest.fixture
def ledger(stub_scheme: StubScheme) -> Ledger:
    return Ledger(scheme=stub_scheme, clock=lambda: _NOW)


@pytest.fixture
def make_signer(stub_scheme: StubScheme) -> Callable[..., Signer]:
    def wrapper(seed: int, role: Role = Role.USER) -> Signer:
        return Signer(seed.to_bytes(32, "little"), role=role, scheme=stub_scheme)

    return wrapper


@pytest.fixture
def empty_city() -> UrbanModel:
    return UrbanModel(bounds=Rect(min=(0.0, 0.0), max=(3000.0, 3000.0)))


@pytest.fixture
def box_city() -> UrbanModel:
    return UrbanModel(
        bounds=Rect(min=(0.0, 0.0), max=(10.0, 10.0)),
        buildings=[
            Building(footprint=[(4.0, 4.0), (6.0, 4.0), (6.0, 6.0), (4.0, 6.0)], height=50.0)
        ],
    )


@pytest.fixture
def extract_error_list() -> Callable[[Any], Any]:
    def wrapper(error: ValidationError) -> list[str]:
        fpaths: list[str] = []

        for error in error.errors():
            fpath: str = ""

            for slice_ in error["loc"]:
                if type(slice_) is int:
                    fpath += f"[{slice_}]"
                else:
                    fpath += "." + slice_

            fpaths.append(fpath)

        return fpaths

    return wrapper


@pytest.fixture
def assert_sequences_equals() -> Callable[[Any], Any]:
    def wrapper(
        model_errors_list: Iterable[str], expected_errors_list: Iterable[str]
    ) -> None:
        model_unmatched: list[str] = []
        expected_unmatched: list[str] = []

        for fpath1 in list(model_errors_list):
            for fpath2 in list(expected_errors_list):
                if fpath1 == fpath2:
                    break
            else:
                model_unmatched.append(fpath1)  # pragma: no cover

        for fpath1 in list(expected_errors_list):
            for fpath2 in list(model_errors_list):
                if fpath1 == fpath2:
                    break
            else:
                expected_unmatched.append(fpath1)  # pragma: no cover

        if model_unmatched or expected_unmatched:
            raise AssertionError(
                f"Unexpected validation errors from "
                f"model_unmatched={model_unmatched}, "
                f"expected_unmatched={expected_unmatched}"
            ) from None  # pragma: no cover

    return wrapper
