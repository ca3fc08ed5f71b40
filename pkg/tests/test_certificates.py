import json

import pytest

from invofactor.core.errors import MalformedInput
from invofactor.services.certificate_service import CertificateService
from invofactor.services.factorization_service import FactorizationService


@pytest.fixture
def service():
    return FactorizationService(window=16)


@pytest.fixture
def shift_cert(service, shift5, inv5):
    return service.factor(shift5, [inv5] * 3)


def test_round_trip_verifies(service, shift5, shift_cert):
    text = service.certificates.dumps(shift_cert)
    loaded = service.certificates.loads(text)
    assert loaded.provenance["branch"] == "free"
    assert len(loaded.factors) == 3
    assert service.certificates.verify(shift5, loaded).passed


def test_wider_window_is_checked_from_the_tails(service, shift5, shift_cert):
    schema = service.certificates.to_schema(shift_cert)
    assert [f.rule.tail.kind for f in schema.factors] == ["periodic"] * 3
    assert all(f.rule.tail.classes for f in schema.factors)
    loaded = CertificateService().loads(schema.model_dump_json(by_alias=True))
    report = CertificateService().verify(shift5, loaded, radius=64)
    assert report.passed
    assert report.first_failure is None
    assert all(r.checked >= 129 for r in report.reports)


def test_uncovered_indices_fail_without_raising(service, shift5, shift_cert):
    schema = service.certificates.to_schema(shift_cert)
    schema.factors[1].rule.tail.classes = []
    loaded = service.certificates.from_schema(schema)
    assert service.certificates.verify(shift5, loaded, radius=16).passed
    report = service.certificates.verify(shift5, loaded, radius=64)
    assert not report.passed
    assert "NoWitness" in report.to_dict()["reports"][1]["failures"][0]["detail"]


def test_parallel_verification(shift5, inv5):
    service = FactorizationService(window=16, jobs=4)
    cert = service.factor(shift5, [inv5] * 3)
    assert cert.passed
    loaded = service.certificates.loads(service.certificates.dumps(cert))
    assert service.certificates.verify(shift5, loaded, radius=40).passed


def test_tampered_coefficient_is_located(service, shift5, shift_cert):
    payload = json.loads(service.certificates.dumps(shift_cert))
    entry = next(
        e for e in payload["factors"][0]["rule"]["entries"]
        if e["index"] == {"block": "S0", "slot": 0, "copy": None}
    )
    entry["image"][0]["coef"] = str((int(entry["image"][0]["coef"]) + 1) % 5)
    loaded = service.certificates.loads(json.dumps(payload))
    report = service.certificates.verify(shift5, loaded)
    assert not report.passed
    assert report.first_failure is not None
    assert "S0" in report.first_failure


def test_save_and_load(service, shift5, shift_cert, tmp_path):
    path = service.certificates.save(shift_cert, tmp_path / "cert.json")
    assert service.certificates.verify(shift5, service.certificates.load(path)).passed


def test_scalar_tail(service, F5, inv5):
    from invofactor.opcore import RepAut

    u = RepAut.scalar(F5, 1)
    cert = service.factor(u, [inv5] * 3)
    schema = service.certificates.to_schema(cert)
    assert {f.rule.tail.kind for f in schema.factors} == {"scalar"}


@pytest.mark.parametrize("text", ["{not json", '{"format": "invofactor-certificate"}', "[]"])
def test_invalid_certificates(service, text):
    with pytest.raises(MalformedInput):
        service.certificates.loads(text)
