import pytest
import pytest_asyncio
from typing import AsyncGenerator
from httpx import AsyncClient, ASGITransport

from invofactor.algebra import QuadPoly, get_field
from invofactor.main import app
from invofactor.opcore import BasisIndex, PeriodicBlock, RepAut, ShiftBlock
from invofactor.linalg import Mat


@pytest_asyncio.fixture(scope="function")
async def client() -> AsyncGenerator[AsyncClient, None]:
    async with AsyncClient(transport=ASGITransport(app=app), base_url="http://test") as c:
        yield c


@pytest.fixture
def F5():
    return get_field("F5")


@pytest.fixture
def F7():
    return get_field("F7")


@pytest.fixture
def inv5(F5):
    return QuadPoly.of(F5, 1, 0, -1)


@pytest.fixture
def inv7(F7):
    return QuadPoly.of(F7, 1, 0, -1)


@pytest.fixture
def unip5(F5):
    return QuadPoly.of(F5, 1, -2, 1)


@pytest.fixture
def shift5(F5):
    return RepAut.shift(F5)


@pytest.fixture
def golden5(F5):
    """⊕ over ω of companion(t² − t − 1) over F5."""
    return RepAut(F5, periodic_blocks=[PeriodicBlock("P0", Mat.from_rows(F5, [[0, 1], [1, 1]]))])


@pytest.fixture
def rank_one7(F7):
    """3·id + w over F7 with w(e0) = e1 on the first two copies."""
    return RepAut.scalar(F7, 3, perturbation={BasisIndex("P0", 0, 0): {BasisIndex("P0", 0, 1): F7(1)}})
