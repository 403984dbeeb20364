import pytest

from piggybank import DhParams, RsaParams, RsaSecret


@pytest.fixture
def desk_rsa() -> tuple[RsaParams, RsaSecret]:
    """n = 51 = 3 * 17, e = 3, d = 11 (e*d = 33 = 1 mod 32)."""
    return RsaParams(51, 3), RsaSecret(3, 17, 32, 11)


@pytest.fixture
def desk_dh() -> DhParams:
    """p = 37, g = 2; 2 generates the full group of order 36."""
    return DhParams(37, 2)
