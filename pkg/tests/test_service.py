"""The HTTP session service, driven through the in-process test client."""

import pytest
from fastapi.testclient import TestClient

from dtac.service import create_app

from conftest import CORPUS


@pytest.fixture()
def client():
    return TestClient(create_app())


@pytest.fixture()
def safer_session(client):
    r = client.post("/sessions", json={
        "program": (CORPUS / "safer-null" / "program.mdfy").read_text(),
        "fixture": (CORPUS / "safer-null" / "fixture.errs").read_text(),
    })
    assert r.status_code == 200
    return r.json()["id"]


def test_create_returns_fixture_reports(client, safer_session):
    r = client.get(f"/sessions/{safer_session}/program")
    body = r.json()
    assert len(body["errors"]) == 16
    nulls = [e for e in body["errors"]
             if e["kind"] == "target object may be null"]
    assert len(nulls) == 15
    assert all(e["line"] > 0 for e in body["errors"])


def test_apply_then_undo_roundtrips_bytes(client, safer_session):
    before = client.get(f"/sessions/{safer_session}/program").json()["text"]
    r = client.post(f"/sessions/{safer_session}/apply",
                    json={"invocation": "null-to-assert()"})
    body = r.json()
    assert body["ok"] is True
    assert "assert comb != null;" in body["program"]
    assert "-" in body["diff"] or "+" in body["diff"]
    r = client.post(f"/sessions/{safer_session}/undo")
    assert r.json()["program"] == before


def test_history_counts_successful_applies(client, safer_session):
    client.post(f"/sessions/{safer_session}/apply",
                json={"invocation": "null-to-assert()"})
    client.post(f"/sessions/{safer_session}/apply",
                json={"invocation": "assert-to-pre()"})
    hist = client.get(f"/sessions/{safer_session}/history").json()
    assert len(hist) == 3  # initial + 2 applies
    assert hist[1]["invocation"] == "null-to-assert()"


def test_failed_apply_leaves_history_unchanged(client, safer_session):
    r = client.post(f"/sessions/{safer_session}/apply",
                    json={"invocation": "pre-to-assert()"})
    body = r.json()
    assert body["ok"] is False and body["status"] == "engine-failure"
    assert len(client.get(f"/sessions/{safer_session}/history").json()) == 1


def test_parse_failure_is_distinguished(client, safer_session):
    r = client.post(f"/sessions/{safer_session}/apply",
                    json={"invocation": "((("})
    body = r.json()
    assert body["ok"] is False and body["status"] == "parse-error"


def test_unknown_session_404(client):
    assert client.get("/sessions/zzz/program").status_code == 404
    assert client.post("/sessions/zzz/apply",
                       json={"invocation": "assert-up()"}).status_code == 404


def test_undo_initial_state_conflict(client, safer_session):
    assert client.post(f"/sessions/{safer_session}/undo").status_code == 409


def test_double_apply_double_undo(client, safer_session):
    initial = client.get(f"/sessions/{safer_session}/program").json()["text"]
    client.post(f"/sessions/{safer_session}/apply",
                json={"invocation": "null-to-assert()"})
    client.post(f"/sessions/{safer_session}/apply",
                json={"invocation": "assert-to-pre()"})
    client.post(f"/sessions/{safer_session}/undo")
    r = client.post(f"/sessions/{safer_session}/undo")
    assert r.json()["program"] == initial


def test_sessions_are_isolated(client):
    simple = "private method f()\n{\n  assert 1 == 1;\n}\n"
    a = client.post("/sessions", json={"program": simple, "fixture": ""}).json()["id"]
    b = client.post("/sessions", json={"program": simple, "fixture": ""}).json()["id"]
    client.post(f"/sessions/{a}/apply", json={"invocation": "assert-E()"})
    ta = client.get(f"/sessions/{a}/program").json()["text"]
    tb = client.get(f"/sessions/{b}/program").json()["text"]
    assert "assert" not in ta
    assert "assert 1 == 1;" in tb


def test_invalid_program_rejected(client):
    r = client.post("/sessions", json={"program": "method ( {", "fixture": ""})
    assert r.status_code == 422


def test_stdlib_endpoint_lists_tactics(client):
    r = client.get("/stdlib")
    body = r.json()
    assert len(body) == 27
    entry = [e for e in body if e["name"] == "assert-I"][0]
    assert entry["arity"] == 1 and entry["formals"] == ["P"]
    assert entry["doc"]


def test_errors_endpoint(client, safer_session):
    r = client.get(f"/sessions/{safer_session}/errors")
    assert len(r.json()) == 16


def test_anchor_index_tracks_markers(client, safer_session):
    client.post(f"/sessions/{safer_session}/apply",
                json={"invocation": "null-to-assert()"})
    body = client.get(f"/sessions/{safer_session}/program").json()
    assert "ass" in body["anchors"]
    text_lines = body["text"].splitlines()
    assert text_lines[body["anchors"]["ass"] - 1].strip() == "/*@ass*/"


def test_snapshots_written_per_apply(tmp_path):
    client = TestClient(create_app(snapshot_dir=str(tmp_path)))
    sid = client.post("/sessions", json={
        "program": "private method f()\n{\n  assert 1 == 1;\n}\n",
        "fixture": "",
    }).json()["id"]
    client.post(f"/sessions/{sid}/apply", json={"invocation": "assert-E()"})
    snaps = sorted((tmp_path / sid).glob("*.mdfy"))
    assert [s.name for s in snaps] == ["0000.mdfy", "0001.mdfy"]
