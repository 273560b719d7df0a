"""Session service: HTTP contract, turn tokens, event sourcing, recovery."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from anamnesis.api import create_app
from anamnesis.errors import (
    NotActive,
    NotTerminated,
    SessionNotFound,
    StaleTurnToken,
)
from anamnesis.gateway import ScriptedBackend
from anamnesis.service import (
    EventKind,
    SessionStore,
    load_events,
    replay_events,
)
from anamnesis.termination import TerminationConfig, termination_score

from conftest import (
    PRUNE,
    decision_rule,
    default_report_rules,
    expand,
    follow_up,
    prune_all_backend,
)


def make_store(backend=None, **kwargs) -> SessionStore:
    return SessionStore(backend=backend or prune_all_backend(), **kwargs)


class TestCreateSession:
    def test_builtin_seeds_eleven_roots_chief_complaint_first(self):
        store = make_store()
        created = store.create_session()
        session = store.session(created["session_id"])
        assert len(session.graph.roots) == 11
        assert created["first_question"]["label"] == "chief_complaint"
        assert created["turn_token"] == "t0"

    def test_corpus_file_with_two_seeds(self, tmp_path):
        from anamnesis.corpus import builtin_seed_set, write_corpus_file

        path = tmp_path / "tiny.json"
        write_corpus_file(str(path), builtin_seed_set()[:2])
        store = make_store(seed_source=str(path))
        created = store.create_session()
        assert len(store.session(created["session_id"]).graph.roots) == 2

    def test_missing_corpus_file(self, tmp_path):
        from anamnesis.errors import CorpusLoadError

        store = make_store(seed_source=str(tmp_path / "nope.json"))
        with pytest.raises(CorpusLoadError):
            store.create_session()


class TestSubmitAnswer:
    def test_prune_all_completes_within_seed_count(self):
        store = make_store()
        created = store.create_session()
        sid, token = created["session_id"], created["turn_token"]
        turns = 0
        terminated = False
        while not terminated and turns <= 11:
            response = store.submit_answer(sid, "a detailed answer", token)
            token = response["turn_token"]
            terminated = response["terminated"]
            turns += 1
        assert terminated
        assert turns == 11

    def test_response_score_matches_offline_recompute(self):
        store = make_store()
        created = store.create_session()
        sid = created["session_id"]
        response = store.submit_answer(sid, "something", created["turn_token"])
        session = store.session(sid)
        offline = termination_score(session.graph, session.interview.exchanges_used)
        assert response["score"] == offline.score

    def test_terminated_session_rejects_answers(self):
        store = make_store(termination=TerminationConfig(threshold=0.01))
        created = store.create_session()
        sid = created["session_id"]
        response = store.submit_answer(sid, "done", created["turn_token"])
        assert response["terminated"]
        with pytest.raises(NotActive):
            store.submit_answer(sid, "more", "t1")

    def test_stale_token_rejected_not_double_applied(self):
        store = make_store()
        created = store.create_session()
        sid, token = created["session_id"], created["turn_token"]
        store.submit_answer(sid, "first answer", token)
        exchanges_before = store.session(sid).interview.exchanges_used
        with pytest.raises(StaleTurnToken):
            store.submit_answer(sid, "first answer", token)
        assert store.session(sid).interview.exchanges_used == exchanges_before

    def test_unknown_session(self):
        store = make_store()
        with pytest.raises(SessionNotFound):
            store.submit_answer("ghost", "hello", "t0")


class TestReport:
    def finished_store(self) -> tuple[SessionStore, str]:
        store = make_store(termination=TerminationConfig(threshold=0.05))
        created = store.create_session()
        sid = created["session_id"]
        store.submit_answer(sid, "all good", created["turn_token"])
        return store, sid

    def test_report_persisted_and_idempotent(self):
        store, sid = self.finished_store()
        first = store.get_report(sid)
        assert store.session(sid).status.wire == "reported"
        second = store.get_report(sid)
        assert first.to_wire() == second.to_wire()
        # Only one report_generated event despite two calls.
        kinds = [e.kind for e in store.events_for(sid)]
        assert kinds.count(EventKind.REPORT_GENERATED) == 1

    def test_active_session_has_no_report(self):
        store = make_store()
        created = store.create_session()
        with pytest.raises(NotTerminated):
            store.get_report(created["session_id"])


class TestSnapshotEndpointData:
    def test_fresh_session_all_open_score_zero(self):
        store = make_store()
        created = store.create_session()
        snapshot = store.get_snapshot(created["session_id"])
        assert snapshot["score"] == 0.0
        assert snapshot["status"] == "active"
        assert {n["state"] for n in snapshot["graph"]["nodes"]} == {"open"}
        assert snapshot["current_question"]["label"] == "chief_complaint"
        assert snapshot["turn_token"] == "t0"

    def test_mid_interview_states_match_event_replay(self):
        backend = ScriptedBackend(
            [
                decision_rule(expand(follow_up("Tell me more?")), times=1),
                decision_rule(PRUNE),
            ]
            + default_report_rules()
        )
        store = make_store(backend=backend)
        created = store.create_session()
        sid, token = created["session_id"], created["turn_token"]
        for _ in range(3):
            response = store.submit_answer(sid, "an answer", token)
            token = response["turn_token"]
        snapshot = store.get_snapshot(sid)
        replayed = replay_events(store.events_for(sid))
        assert replayed.graph.snapshot() == snapshot["graph"]

    def test_unknown_session(self):
        with pytest.raises(SessionNotFound):
            make_store().get_snapshot("ghost")


class TestEventSourcing:
    def run_session(self, tmp_path, backend=None):
        store = make_store(backend=backend, log_dir=tmp_path)
        created = store.create_session()
        sid, token = created["session_id"], created["turn_token"]
        terminated = False
        while not terminated:
            response = store.submit_answer(sid, "a detailed answer", token)
            token = response["turn_token"]
            terminated = response["terminated"]
        store.get_report(sid)
        return store, sid

    def test_full_replay_equals_live_session(self, tmp_path):
        store, sid = self.run_session(tmp_path)
        live = store.session(sid)
        replayed = replay_events(load_events(tmp_path / f"{sid}.jsonl"))
        assert replayed.comparable() == live.comparable()

    def test_replay_with_expansions_equals_live(self, tmp_path):
        backend = ScriptedBackend(
            [
                decision_rule(
                    expand(follow_up("One more?"), follow_up("Another?")), times=2
                ),
                decision_rule(PRUNE),
            ]
            + default_report_rules()
        )
        store, sid = self.run_session(tmp_path, backend=backend)
        live = store.session(sid)
        replayed = replay_events(load_events(tmp_path / f"{sid}.jsonl"))
        assert replayed.comparable() == live.comparable()

    def test_seq_contiguous_from_zero(self, tmp_path):
        store, sid = self.run_session(tmp_path)
        events = load_events(tmp_path / f"{sid}.jsonl")
        assert [e.seq for e in events] == list(range(len(events)))

    def test_any_event_prefix_replays_to_a_valid_session(self, tmp_path):
        store, sid = self.run_session(tmp_path)
        events = load_events(tmp_path / f"{sid}.jsonl")
        for cut in range(1, len(events) + 1):
            replayed = replay_events(events[:cut])
            assert replayed.id == sid
            snapshot = replayed.graph.snapshot()
            assert snapshot["nodes"]
            # A valid session is resumable or finished, never wedged: if a
            # question is pending it must be open and unanswered.
            pending = replayed.interview.pending_node
            if pending is not None and not replayed.interview.terminated:
                node = replayed.graph.node(pending)
                assert node.state.wire == "open"
                assert node.answer is None

    def test_truncated_file_recovery(self, tmp_path):
        store, sid = self.run_session(tmp_path)
        path = tmp_path / f"{sid}.jsonl"
        lines = path.read_text().splitlines()
        # Cut mid-line to fake a crash during the final write.
        broken = "\n".join(lines[:-1]) + "\n" + lines[-1][: len(lines[-1]) // 2]
        path.write_text(broken)
        events = load_events(path)
        assert len(events) == len(lines) - 1
        replay_events(events)  # must not raise

    def test_store_recovery_scans_log_dir(self, tmp_path):
        store, sid = self.run_session(tmp_path)
        live = store.session(sid).comparable()
        recovered_store = make_store(log_dir=tmp_path)
        assert recovered_store.session(sid).comparable() == live

    def test_recovered_session_is_resumable(self, tmp_path):
        store = make_store(log_dir=tmp_path)
        created = store.create_session()
        sid, token = created["session_id"], created["turn_token"]
        store.submit_answer(sid, "first", token)

        resumed = make_store(log_dir=tmp_path)
        session = resumed.session(sid)
        response = resumed.submit_answer(sid, "second", session.turn_token)
        assert response["score"] >= 0


def api_client(tmp_path=None, backend=None, **kwargs) -> TestClient:
    store = make_store(backend=backend, log_dir=tmp_path, **kwargs)
    return TestClient(create_app(store))


class TestHttpApi:
    def test_healthz(self):
        assert api_client().get("/healthz").json() == {"status": "ok"}

    def test_full_interview_over_http(self, tmp_path):
        client = api_client(tmp_path)
        created = client.post("/sessions", json={"language": "en"}).json()
        sid, token = created["session_id"], created["turn_token"]
        assert created["first_question"]["label"] == "chief_complaint"
        terminated = False
        answers = 0
        while not terminated:
            response = client.post(
                f"/sessions/{sid}/answers",
                json={"answer": "a detailed answer", "turn_token": token},
            )
            assert response.status_code == 200
            body = response.json()
            token = body["turn_token"]
            terminated = body["terminated"]
            answers += 1
            assert 0.0 <= body["score"] <= 1.0
        assert answers == 11
        report = client.get(f"/sessions/{sid}/report")
        assert report.status_code == 200
        assert report.json()["sections"]
        snapshot = client.get(f"/sessions/{sid}/snapshot").json()
        assert snapshot["status"] == "reported"

    def test_stale_token_conflict(self):
        client = api_client()
        created = client.post("/sessions", json={}).json()
        sid, token = created["session_id"], created["turn_token"]
        ok = client.post(
            f"/sessions/{sid}/answers", json={"answer": "x", "turn_token": token}
        )
        assert ok.status_code == 200
        dup = client.post(
            f"/sessions/{sid}/answers", json={"answer": "x", "turn_token": token}
        )
        assert dup.status_code == 409
        assert dup.json()["error"] == "StaleTurnToken"

    def test_unknown_session_404(self):
        client = api_client()
        assert client.get("/sessions/ghost/snapshot").status_code == 404

    def test_report_before_termination_409(self):
        client = api_client()
        created = client.post("/sessions", json={}).json()
        response = client.get(f"/sessions/{created['session_id']}/report")
        assert response.status_code == 409

    def test_backend_failure_returns_503_with_retry_after(self):
        client = api_client(backend=ScriptedBackend([]))
        created = client.post("/sessions", json={}).json()
        response = client.post(
            f"/sessions/{created['session_id']}/answers",
            json={"answer": "x", "turn_token": created["turn_token"]},
        )
        assert response.status_code == 503
        assert response.headers.get("retry-after") == "1"

    def test_config_override_per_session(self):
        client = api_client()
        created = client.post(
            "/sessions",
            json={"config": {"termination": {"profile": "routine", "max_exchanges": 5}}},
        ).json()
        sid, token = created["session_id"], created["turn_token"]
        terminated, turns = False, 0
        while not terminated:
            body = client.post(
                f"/sessions/{sid}/answers", json={"answer": "x", "turn_token": token}
            ).json()
            token, terminated = body["turn_token"], body["terminated"]
            turns += 1
        # routine profile: 0.80 coverage is enough, so fewer than 11 turns.
        assert turns < 11

    def test_bearer_token_enforced_when_configured(self):
        store = make_store()
        client = TestClient(create_app(store, api_token="sesame"))
        assert client.post("/sessions", json={}).status_code == 401
        assert client.get("/healthz").status_code == 200
        ok = client.post(
            "/sessions", json={}, headers={"Authorization": "Bearer sesame"}
        )
        assert ok.status_code == 200

    def test_empty_answer_422(self):
        client = api_client()
        created = client.post("/sessions", json={}).json()
        response = client.post(
            f"/sessions/{created['session_id']}/answers",
            json={"answer": "", "turn_token": created["turn_token"]},
        )
        assert response.status_code == 422
