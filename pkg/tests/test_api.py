import pytest
from httpx import AsyncClient

INVOLUTIONS = "t^2-1;t^2-1;t^2-1"
SHIFT = {"field": "F5", "shift_blocks": [{"id": "S0", "multiplier": 1}]}


@pytest.mark.asyncio
async def test_health_check(client: AsyncClient):
    response = await client.get("/health")
    assert response.status_code == 200
    data = response.json()
    assert data["status"] == "healthy"


@pytest.mark.asyncio
async def test_acceptable(client: AsyncClient):
    response = await client.post("/api/v1/acceptable", json={"field": "F5", "lambda": 1, "polys": INVOLUTIONS})
    assert response.status_code == 200
    data = response.json()
    assert data["kind"] == "ProductOfRoots"
    assert len(data["witness"]) == 3


@pytest.mark.asyncio
async def test_acceptable_rejects_bad_field(client: AsyncClient):
    response = await client.post("/api/v1/acceptable", json={"field": "F4", "lambda": 1, "polys": INVOLUTIONS})
    assert response.status_code == 422
    assert response.json()["detail"]["error"] == "MalformedInput"


@pytest.mark.asyncio
async def test_factor_and_verify(client: AsyncClient):
    response = await client.post("/api/v1/factor", json={"operator": SHIFT, "polys": INVOLUTIONS, "window": 8})
    assert response.status_code == 200
    cert = response.json()
    assert cert["provenance"]["branch"] == "free"
    assert all(r["passed"] for r in cert["report"])

    response = await client.post("/api/v1/verify", json={"operator": SHIFT, "certificate": cert})
    assert response.status_code == 200
    assert response.json()["passed"] is True


@pytest.mark.asyncio
async def test_refusal_is_a_conflict(client: AsyncClient):
    operator = {"field": "F7", "periodic_blocks": [{"id": "P0", "matrix": [[3]]}]}
    response = await client.post("/api/v1/factor", json={"operator": operator, "polys": INVOLUTIONS})
    assert response.status_code == 409
    assert response.json()["detail"]["reason"] == "NotAcceptable"


@pytest.mark.asyncio
async def test_operator_needs_an_infinite_block(client: AsyncClient):
    operator = {"field": "F5", "finite_blocks": [{"id": "A", "matrix": [[2, 0], [0, 2]]}]}
    response = await client.post("/api/v1/factor", json={"operator": operator, "polys": INVOLUTIONS})
    assert response.status_code == 422


@pytest.mark.asyncio
async def test_classify(client: AsyncClient):
    operator = {"field": "F7", "periodic_blocks": [{"id": "P0", "matrix": [[3]]}]}
    response = await client.post("/api/v1/classify", json={"operator": operator, "flavor": "involutions"})
    assert response.status_code == 200
    data = response.json()
    assert data["product"] is False
    assert data["condition"] == "(i)"


@pytest.mark.asyncio
async def test_census(client: AsyncClient):
    response = await client.get("/api/v1/census", params={"n": 2, "q": 3, "k": 4, "poly": "t^2-1"})
    assert response.status_code == 200
    data = response.json()
    assert data["total"] == 48
    assert sum(data["counts_by_det"].values()) == 48


@pytest.mark.asyncio
async def test_census_budget(client: AsyncClient):
    response = await client.get("/api/v1/census", params={"n": 2, "q": 5, "k": 4, "budget": 5})
    assert response.status_code == 507


@pytest.mark.asyncio
async def test_search(client: AsyncClient):
    body = {"field": "F7", "target": [[3, 0], [0, 3]], "polys": INVOLUTIONS}
    response = await client.post("/api/v1/search", json=body)
    assert response.status_code == 200
    data = response.json()
    assert data["member"] is False
    assert data["method"] == "determinant"
