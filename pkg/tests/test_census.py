import pytest

from invofactor.core.errors import MalformedInput
from invofactor.services.census_service import MAGIC, CensusService


@pytest.fixture
def census_service(tmp_path):
    return CensusService(directory=tmp_path)


def test_write_and_read(census_service, tmp_path):
    result = census_service.run(2, 3, 4, "t^2-1")
    path = census_service.write(result)
    assert path == tmp_path / "census_n2_q3_k4.ifcn"
    assert path.read_bytes()[:4] == MAGIC

    header, members = CensusService.read(path)
    assert header["total"] == 48
    assert header["poly"] == "t^2+2"
    assert members == result.members
    assert len(set(members)) == 48


def test_run_and_store(census_service, tmp_path):
    path = census_service.run_and_store(1, 5, 2, "t^2-1")
    header, members = CensusService.read(path)
    assert header["counts_by_det"] == {"1": 1, "4": 1}
    assert len(members) == 2


def test_truncated_file(census_service, tmp_path):
    path = census_service.write(census_service.run(2, 3, 2, "t^2-1"), tmp_path / "short.ifcn")
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(MalformedInput, match="truncated"):
        CensusService.read(path)


def test_not_a_census(tmp_path):
    path = tmp_path / "junk.ifcn"
    path.write_bytes(b"nope")
    with pytest.raises(MalformedInput):
        CensusService.read(path)
