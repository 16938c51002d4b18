"""Wire-protocol behavior of the scoring service."""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from abduct_bridge.encoders import HashedNgramEncoder, similarity_scores
from abduct_bridge.service import create_app


@pytest.fixture(scope="module")
def client():
    app = create_app(HashedNgramEncoder(), max_batch=128)
    with TestClient(app) as c:
        yield c


class TestHealthz:
    def test_ready(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        body = resp.json()
        assert body["ready"] is True
        assert body["model_id"].startswith("hashed-ngram")

    def test_not_ready_before_warmup(self):
        app = create_app(warm=False)
        with TestClient(app) as c:
            assert c.get("/healthz").json()["ready"] is False
            resp = c.post("/score", json={"task": "similarity",
                                          "pairs": [["a", "b"]]})
            assert resp.status_code == 503


class TestScoreSimilarity:
    def test_round_trip_alignment(self, client):
        pairs = [
            ["hawks eat lizards", "hawks eat lizards"],
            ["hawks eat lizards", "coral lives in the ocean"],
            ["the moon orbits the earth", "a moon orbit around the earth"],
        ]
        resp = client.post("/score", json={"task": "similarity", "pairs": pairs})
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["scores"]) == 3
        # independent recomputation against the same encoder
        want = similarity_scores(HashedNgramEncoder(), [tuple(p) for p in pairs])
        assert body["scores"] == pytest.approx(want)
        assert body["scores"][0] == 5.0
        assert body["latency_ms"] >= 0.0
        assert body["model_id"].startswith("hashed-ngram")

    def test_empty_pairs(self, client):
        resp = client.post("/score", json={"task": "similarity", "pairs": []})
        assert resp.status_code == 200
        assert resp.json()["scores"] == []

    def test_scores_within_sts_range(self, client):
        pairs = [["alpha beta gamma", "delta epsilon"], ["one", "one two"]]
        resp = client.post("/score", json={"task": "similarity", "pairs": pairs})
        for s in resp.json()["scores"]:
            assert 0.0 <= s <= 5.0


class TestScoreAnswer:
    def test_triples(self, client):
        pairs = [
            ["hawks eat lizards and geckos", "what do hawks eat?", "geckos"],
            ["rivers flow to the sea", "what do hawks eat?", "geckos"],
        ]
        resp = client.post("/score", json={"task": "answer", "pairs": pairs})
        assert resp.status_code == 200
        scores = resp.json()["scores"]
        assert len(scores) == 2
        assert all(0.0 <= s <= 1.0 for s in scores)
        assert scores[0] > scores[1]


class TestErrorContract:
    def test_malformed_body_400(self, client):
        assert client.post("/score", json={"pairs": [["a", "b"]]}).status_code == 400
        assert client.post("/score", json={"task": "nope", "pairs": []}).status_code == 400
        assert client.post("/score", content=b"{not json",
                           headers={"Content-Type": "application/json"}).status_code == 400

    def test_wrong_arity_400(self, client):
        resp = client.post("/score", json={"task": "similarity",
                                           "pairs": [["a", "b", "c"]]})
        assert resp.status_code == 400
        resp = client.post("/score", json={"task": "answer", "pairs": [["a", "b"]]})
        assert resp.status_code == 400

    def test_empty_text_400(self, client):
        resp = client.post("/score", json={"task": "similarity", "pairs": [["a", ""]]})
        assert resp.status_code == 400

    def test_batch_too_large_413(self):
        app = create_app(HashedNgramEncoder(), max_batch=4)
        with TestClient(app) as c:
            pairs = [["a", "b"]] * 5
            resp = c.post("/score", json={"task": "similarity", "pairs": pairs})
            assert resp.status_code == 413


class TestStateless:
    def test_identical_requests_identical_responses(self, client):
        body = {"task": "similarity",
                "pairs": [["hawks eat lizards", "geckos are lizards"]]}
        first = client.post("/score", json=body).json()["scores"]
        second = client.post("/score", json=body).json()["scores"]
        assert first == second
