import json
import time

import pytest
from fastapi.testclient import TestClient

from qualda.service import create_app

DATING = [
    "we had a lovely dinner date tonight",
    "dating is hard he dumped me at dinner",
    "another dinner date with my love",
    "my date dumped me so dating hurts",
]
WORK = [
    "my boss gave me a deadline at the office",
    "office work and a grumpy boss again",
    "the boss moved my deadline at work",
    "work office deadline boss meeting",
]


def jsonl(texts, prefix):
    return "\n".join(
        json.dumps({"doc_id": f"{prefix}{i}", "text": t}) for i, t in enumerate(texts, 1)
    )


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path / "projects")
    with TestClient(app) as c:
        yield c


@pytest.fixture
def project(client):
    pid = client.post("/api/v1/projects", json={"name": "demo"}).json()["project_id"]
    body = jsonl(DATING, "dat") + "\n" + jsonl(WORK, "wrk")
    resp = client.post(f"/api/v1/projects/{pid}/documents:import", content=body)
    assert resp.status_code == 200, resp.text
    return pid


def wait_for_job(client, pid, job_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        job = client.get(f"/api/v1/projects/{pid}/jobs/{job_id}").json()
        if job["state"] in ("done", "failed", "cancelled"):
            return job
        time.sleep(0.02)
    raise AssertionError("job did not finish in time")


def train(client, pid, overrides=None):
    resp = client.post(f"/api/v1/projects/{pid}/train", json=overrides or {})
    assert resp.status_code == 200, resp.text
    job = wait_for_job(client, pid, resp.json()["job_id"])
    assert job["state"] == "done", job
    return job


class TestProjectsAndImport:
    def test_create_and_get(self, client):
        created = client.post("/api/v1/projects", json={"name": "x"}).json()
        got = client.get(f"/api/v1/projects/{created['project_id']}").json()
        assert got["name"] == "x"
        assert got["documents"] == 0

    def test_unknown_project_404(self, client):
        resp = client.get("/api/v1/projects/nope")
        assert resp.status_code == 404
        assert resp.json()["code"] == "NotFound"

    def test_import_counts(self, client):
        pid = client.post("/api/v1/projects", json={"name": "x"}).json()["project_id"]
        resp = client.post(
            f"/api/v1/projects/{pid}/documents:import", content=jsonl(DATING, "d")
        )
        assert resp.json()["documents"] == 4
        assert resp.json()["vocabulary_size"] > 0

    def test_import_parse_error_line(self, client):
        pid = client.post("/api/v1/projects", json={"name": "x"}).json()["project_id"]
        resp = client.post(
            f"/api/v1/projects/{pid}/documents:import",
            content='{"text":"ok"}\nnot json',
        )
        assert resp.status_code == 422
        assert "line 2" in resp.json()["message"]

    def test_import_duplicate_id(self, client, project):
        resp = client.post(
            f"/api/v1/projects/{project}/documents:import", content=jsonl(DATING, "dat")
        )
        assert resp.status_code == 422
        assert resp.json()["code"] == "DuplicateId"


class TestSearch:
    def test_terms_and_paging(self, client, project):
        resp = client.get(
            f"/api/v1/projects/{project}/documents", params={"terms": "dinner"}
        )
        ids = resp.json()["doc_ids"]
        assert ids == sorted(ids)
        assert all(i.startswith("dat") for i in ids)
        page = client.get(
            f"/api/v1/projects/{project}/documents",
            params={"terms": "dinner", "limit": 1, "offset": 1},
        ).json()["doc_ids"]
        assert page == ids[1:2]

    def test_and_semantics(self, client, project):
        both = client.get(
            f"/api/v1/projects/{project}/documents",
            params={"terms": "dinner,dumped"},
        ).json()["doc_ids"]
        assert both == ["dat2"]

    def test_bbox_filter(self, client):
        pid = client.post("/api/v1/projects", json={"name": "geo"}).json()["project_id"]
        lines = "\n".join(
            [
                json.dumps({"doc_id": "in1", "text": "hello city", "geo": [51.5, -0.1]}),
                json.dumps({"doc_id": "out1", "text": "hello coast", "geo": [43.0, 5.0]}),
                json.dumps({"doc_id": "nogeo", "text": "hello nowhere"}),
            ]
        )
        client.post(f"/api/v1/projects/{pid}/documents:import", content=lines)
        hits = client.get(
            f"/api/v1/projects/{pid}/documents",
            params={"bbox": "50,-1,52,1"},
        ).json()["doc_ids"]
        assert hits == ["in1"]
        bad = client.get(
            f"/api/v1/projects/{pid}/documents", params={"bbox": "1,2,3"}
        )
        assert bad.status_code == 422


class TestCodingAndView:
    def test_manual_chip_and_occurrences(self, client, project):
        doc = client.get(f"/api/v1/projects/{project}/documents/dat2").json()
        text = doc["text"]
        span = [text.index("dating"), text.index("dating") + len("dating")]
        ann = client.post(
            f"/api/v1/projects/{project}/documents/dat2/codes",
            json={"span": span, "label": "Dating"},
        ).json()
        assert ann["origin"] == "manual"
        assert ann["label"] == "dating"
        assert span in ann["occurrences"]
        view = client.get(f"/api/v1/projects/{project}/documents/dat2").json()
        chips = view["chips"]
        assert len(chips) == 1
        assert chips[0]["origin"] == "manual"

    def test_whitespace_selection_422(self, client, project):
        doc = client.get(f"/api/v1/projects/{project}/documents/dat1").json()
        gap = doc["text"].index(" ")
        resp = client.post(
            f"/api/v1/projects/{project}/documents/dat1/codes",
            json={"span": [gap, gap + 1], "label": "x"},
        )
        assert resp.status_code == 422
        assert resp.json()["code"] == "EmptySelection"

    def test_unknown_document_404(self, client, project):
        resp = client.get(f"/api/v1/projects/{project}/documents/ghost")
        assert resp.status_code == 404

    def test_view_before_training_has_no_autos(self, client, project):
        doc = client.get(f"/api/v1/projects/{project}/documents/dat1").json()
        assert doc["snapshot_version"] is None
        assert doc["annotations"] == []

    def test_idempotent_retry_same_request_id(self, client, project):
        doc = client.get(f"/api/v1/projects/{project}/documents/dat1").json()
        text = doc["text"]
        span = [text.index("dinner"), text.index("dinner") + 6]
        headers = {"X-Request-Id": "req-1"}
        first = client.post(
            f"/api/v1/projects/{project}/documents/dat1/codes",
            json={"span": span, "label": "food"},
            headers=headers,
        ).json()
        second = client.post(
            f"/api/v1/projects/{project}/documents/dat1/codes",
            json={"span": span, "label": "food"},
            headers=headers,
        ).json()
        assert first == second
        view = client.get(f"/api/v1/projects/{project}/documents/dat1").json()
        manual = [a for a in view["annotations"] if a["origin"] == "manual"]
        assert len(manual) == 1


def code_span(client, pid, doc_id, word, label):
    doc = client.get(f"/api/v1/projects/{pid}/documents/{doc_id}").json()
    start = doc["text"].index(word)
    return client.post(
        f"/api/v1/projects/{pid}/documents/{doc_id}/codes",
        json={"span": [start, start + len(word)], "label": label},
    ).json()


class TestTrainingLoop:
    def test_full_interactive_loop(self, client, project):
        code_span(client, project, "dat1", "dinner", "dating")
        code_span(client, project, "dat1", "date", "dating")
        code_span(client, project, "wrk1", "boss", "work")
        code_span(client, project, "wrk1", "office", "work")

        job = train(client, project, {"k_free": 1, "rng_seed": 7, "tau_token": 0.3})
        assert job["version"] == 1
        assert job["trace"]["iterations"] >= 1

        # auto chips on an uncoded dating document
        view = client.get(f"/api/v1/projects/{project}/documents/dat3").json()
        assert view["snapshot_version"] == 1
        autos = [c for c in view["chips"] if c["origin"] == "auto"]
        assert autos, view["chips"]
        assert any(c["label"] == "dating" for c in autos)

        # theme board is bound to topics
        themes = client.get(f"/api/v1/projects/{project}/themes").json()["themes"]
        assert all(t["topic"] is not None for t in themes)

        # topic sampling ranks dating docs on the dating theme
        dating_theme = next(t for t in themes if t["name"] == "dating")
        ranked = client.get(
            f"/api/v1/projects/{project}/documents",
            params={"topic": dating_theme["theme_id"], "limit": 3},
        ).json()["documents"]
        assert ranked[0]["doc_id"].startswith("dat")
        assert ranked[0]["score"] >= ranked[-1]["score"]

        # explanation lists contributing words with spans
        explain = client.get(
            f"/api/v1/projects/{project}/documents/dat2/explain/{dating_theme['theme_id']}"
        ).json()
        assert explain["words"]
        assert explain["words"][0]["contribution"] >= explain["words"][-1]["contribution"]

        # top words endpoint
        top = client.get(
            f"/api/v1/projects/{project}/topics/0/top-words", params={"n": 3}
        ).json()
        assert len(top["words"]) == 3

    def test_delete_then_retrain_suppresses(self, client, project):
        code_span(client, project, "dat1", "dinner", "dating")
        code_span(client, project, "wrk1", "boss", "work")
        train(client, project, {"k_free": 1, "rng_seed": 3, "tau_token": 0.3})

        view = client.get(f"/api/v1/projects/{project}/documents/dat2").json()
        autos = [c for c in view["chips"] if c["origin"] == "auto" and c["label"] == "dating"]
        assert autos
        code_id = autos[0]["code_id"]
        deleted = client.request(
            "DELETE", f"/api/v1/projects/{project}/documents/dat2/codes/{code_id}"
        ).json()
        assert deleted["origin"] == "deleted"

        view = client.get(f"/api/v1/projects/{project}/documents/dat2").json()
        assert [c for c in view["chips"] if c["origin"] == "deleted"]

        train(client, project, {"k_free": 1, "rng_seed": 3, "tau_token": 0.3})
        view = client.get(f"/api/v1/projects/{project}/documents/dat2").json()
        labels = [(c["label"], c["origin"]) for c in view["chips"]]
        assert ("dating", "deleted") in labels
        assert ("dating", "auto") not in labels

    def test_failed_job_keeps_snapshot(self, client, project):
        code_span(client, project, "dat1", "dinner", "dating")
        train(client, project, {"k_free": 1, "rng_seed": 1})
        before = client.get(f"/api/v1/projects/{project}").json()["snapshot_version"]

        resp = client.post(
            f"/api/v1/projects/{project}/train", json={"max_em_iters": 0}
        )
        assert resp.status_code == 422  # config invalid before a job is created

        # an engine-level failure after job creation: no topics at all
        empty_pid = client.post("/api/v1/projects", json={"name": "empty"}).json()["project_id"]
        client.post(f"/api/v1/projects/{empty_pid}/documents:import", content=jsonl(WORK, "w"))
        job = client.post(f"/api/v1/projects/{empty_pid}/train", json={"k_free": 0}).json()
        final = wait_for_job(client, empty_pid, job["job_id"])
        assert final["state"] == "failed"
        assert "NoTopics" in final["message"]

        after = client.get(f"/api/v1/projects/{project}").json()["snapshot_version"]
        assert after == before

    def test_busy_while_running(self, client, project, monkeypatch):
        import qualda.training as training_mod

        real_fit = training_mod.fit

        def slow_fit(*args, **kwargs):
            time.sleep(0.4)
            return real_fit(*args, **kwargs)

        monkeypatch.setattr(training_mod, "fit", slow_fit)
        first = client.post(f"/api/v1/projects/{project}/train", json={"k_free": 1})
        assert first.status_code == 200
        second = client.post(f"/api/v1/projects/{project}/train", json={"k_free": 1})
        assert second.status_code == 409
        assert second.json()["code"] == "Busy"
        wait_for_job(client, project, first.json()["job_id"])

    def test_cancel_running_job(self, client, project, monkeypatch):
        import qualda.training as training_mod

        real_fit = training_mod.fit

        def damped_fit(corpus, themes, constraints, config, **kwargs):
            slowed = config
            slowed.max_em_iters = 500
            slowed.conv_tol = 1e-300

            original_cb = kwargs.get("iter_callback")

            def pausing_cb(model, states, trace):
                time.sleep(0.01)
                if original_cb:
                    original_cb(model, states, trace)

            kwargs["iter_callback"] = pausing_cb
            return real_fit(corpus, themes, constraints, slowed, **kwargs)

        monkeypatch.setattr(training_mod, "fit", damped_fit)
        job = client.post(f"/api/v1/projects/{project}/train", json={"k_free": 2}).json()
        cancel = client.post(
            f"/api/v1/projects/{project}/jobs/{job['job_id']}:cancel"
        )
        assert cancel.status_code == 200
        final = wait_for_job(client, project, job["job_id"])
        assert final["state"] == "cancelled"
        # no snapshot was published by the cancelled run
        assert client.get(f"/api/v1/projects/{project}").json()["snapshot_version"] is None

    def test_create_project_idempotent(self, client):
        headers = {"X-Request-Id": "create-1"}
        first = client.post("/api/v1/projects", json={"name": "once"}, headers=headers).json()
        second = client.post("/api/v1/projects", json={"name": "once"}, headers=headers).json()
        assert first["project_id"] == second["project_id"]
        names = [p["name"] for p in client.get("/api/v1/projects").json()["projects"]]
        assert names.count("once") == 1

    def test_topics_before_training_409(self, client, project):
        resp = client.get(f"/api/v1/projects/{project}/topics/0/top-words")
        assert resp.status_code == 409
        assert resp.json()["code"] == "StaleModel"


class TestThemeBoard:
    def test_merge_split_rename(self, client, project):
        a = code_span(client, project, "dat1", "dinner", "dating")
        b = code_span(client, project, "dat2", "dumped", "break up")
        themes = client.get(f"/api/v1/projects/{project}/themes").json()["themes"]
        dating = next(t for t in themes if t["name"] == "dating")

        merged = client.post(
            f"/api/v1/projects/{project}/themes/{dating['theme_id']}/merge",
            json={"code_id": b["code_id"]},
        ).json()
        assert {c["label"] for c in merged["codes"]} == {"dating", "break up"}
        assert len(client.get(f"/api/v1/projects/{project}/themes").json()["themes"]) == 1

        split = client.post(
            f"/api/v1/projects/{project}/themes/{dating['theme_id']}/split",
            json={"code_id": b["code_id"]},
        ).json()
        assert split["new_theme"]["name"] == "break up"
        assert len(client.get(f"/api/v1/projects/{project}/themes").json()["themes"]) == 2

        renamed = client.patch(
            f"/api/v1/projects/{project}/themes/{dating['theme_id']}",
            json={"name": "romance"},
        ).json()
        assert renamed["name"] == "romance"

    def test_self_merge_422(self, client, project):
        a = code_span(client, project, "dat1", "dinner", "dating")
        themes = client.get(f"/api/v1/projects/{project}/themes").json()["themes"]
        resp = client.post(
            f"/api/v1/projects/{project}/themes/{themes[0]['theme_id']}/merge",
            json={"code_id": a["code_id"]},
        )
        assert resp.status_code == 422
        assert resp.json()["code"] == "SelfMerge"

    def test_merged_topics_carry_into_next_training(self, client, project):
        code_span(client, project, "dat1", "dinner", "dating")
        code_span(client, project, "dat2", "dumped", "break up")
        train(client, project, {"k_free": 1, "rng_seed": 5})
        themes = client.get(f"/api/v1/projects/{project}/themes").json()["themes"]
        dating = next(t for t in themes if t["name"] == "dating")
        breakup = next(t for t in themes if t["name"] == "break up")
        client.post(
            f"/api/v1/projects/{project}/themes/{dating['theme_id']}/merge",
            json={"code_id": breakup["codes"][0]["code_id"]},
        )
        job = train(client, project, {"k_free": 1, "rng_seed": 5})
        assert job["version"] == 2
        themes = client.get(f"/api/v1/projects/{project}/themes").json()["themes"]
        assert len(themes) == 1
        assert themes[0]["topic"] is not None


class TestRestartRecovery:
    def test_projects_reload_from_disk(self, tmp_path):
        root = tmp_path / "projects"
        app = create_app(root)
        with TestClient(app) as client:
            pid = client.post("/api/v1/projects", json={"name": "keep"}).json()["project_id"]
            client.post(f"/api/v1/projects/{pid}/documents:import", content=jsonl(DATING, "d"))
            code_span(client, pid, "d1", "dinner", "dating")
            train(client, pid, {"k_free": 1, "rng_seed": 2})
            top_before = client.get(f"/api/v1/projects/{pid}/topics/0/top-words").json()

        app2 = create_app(root)
        with TestClient(app2) as client2:
            summary = client2.get(f"/api/v1/projects/{pid}").json()
            assert summary["documents"] == 4
            assert summary["snapshot_version"] == 1
            top_after = client2.get(f"/api/v1/projects/{pid}/topics/0/top-words").json()
            assert top_after == top_before
            # explain works after reload (phi recomputed on demand)
            themes = client2.get(f"/api/v1/projects/{pid}/themes").json()["themes"]
            out = client2.get(
                f"/api/v1/projects/{pid}/documents/d1/explain/{themes[0]['theme_id']}"
            )
            assert out.status_code == 200
            assert out.json()["words"]
