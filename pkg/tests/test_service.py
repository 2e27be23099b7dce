"""The audit HTTP service and the oracle wire protocol."""

import json

import pytest
from fastapi.testclient import TestClient

from soaudit import __version__
from soaudit.cli import main
from soaudit.errors import OracleUnavailable
from soaudit.oracles.builtin import BigramFillMask, BigramPerplexity, LinearClassifier
from soaudit.report import strip_volatile
from soaudit.service import create_audit_app, create_oracle_app
from test_oracles import AppServer

DATASET = [
    {"text": "a deep and meaningful film .", "label": 1},
    {"text": "a truly bad film with no heart .", "label": 0},
    {"text": "the deep story is a film gem .", "label": 1},
    {"text": "a deep and moving film indeed .", "label": 1},
]
SETTINGS = {"k": 2, "beam_width": 5, "kappa": 10, "delta": 6.0, "seed": 7}
SYNONYMS = [["film", "movie"], ["bad", "unhealthy"], ["deep", "profound"]]


@pytest.fixture(scope="module")
def client():
    return TestClient(create_audit_app())


class TestAuditApp:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "version": __version__}

    def test_attack_roundtrip(self, client):
        resp = client.post("/v1/attack", json={
            "dataset": DATASET,
            "synonyms": SYNONYMS,
            "method": "so-beam",
            "settings": SETTINGS,
        })
        assert resp.status_code == 200
        report = resp.json()
        assert set(report) == {
            "config", "examples", "aggregate", "version", "started_at", "finished_at",
        }
        assert report["config"]["dataset_path"] == "<inline>"
        assert len(report["examples"]) == len(DATASET)

    def test_unknown_method_rejected(self, client):
        resp = client.post("/v1/attack", json={
            "dataset": DATASET, "synonyms": SYNONYMS, "method": "gradient",
        })
        assert resp.status_code == 422

    def test_bias_estimate_and_filter(self, client):
        for path in ("/v1/bias/estimate", "/v1/bias/filter"):
            resp = client.post(path, json={
                "dataset": DATASET,
                "pairs": [["film", "movie"]],
                "settings": {"k": 1, "kappa": 10, "delta": 6.0},
            })
            assert resp.status_code == 200
            assert resp.json()["examples"]

    def test_neighbors(self, client):
        resp = client.post("/v1/neighbors", json={
            "dataset": DATASET[:2],
            "settings": {"k": 1, "kappa": 10, "delta": 6.0},
        })
        assert resp.status_code == 200
        assert resp.json()["aggregate"]["member_total"] >= 0

    def test_validate_roundtrip(self, client):
        report = client.post("/v1/attack", json={
            "dataset": DATASET,
            "synonyms": SYNONYMS,
            "method": "so-enum",
            "settings": SETTINGS,
        }).json()
        resp = client.post("/v1/validate", json={"report": report, "dataset": DATASET})
        assert resp.status_code == 200
        body = resp.json()
        assert body["ok"] is True
        assert body["failures"] == []

    def test_budget_error_maps_to_400(self, client):
        resp = client.post("/v1/neighbors", json={
            "dataset": DATASET[:1],
            "settings": {"k": 5, "kappa": 10, "delta": 6.0},
        })
        assert resp.status_code == 400
        assert "error" in resp.json()


def _oracle_client():
    corpus = [tuple(line["text"].split()) for line in DATASET]
    classifier = LinearClassifier({"deep": 1.0, "bad": -1.0})
    app = create_oracle_app(classifier, BigramFillMask(corpus), BigramPerplexity(corpus))
    return TestClient(app)


class TestOracleProtocol:
    def test_predict(self):
        client = _oracle_client()
        resp = client.post("/v1/predict", json={"texts": ["a deep and meaningful film ."]})
        assert resp.status_code == 200
        probs = resp.json()["probs"]
        assert len(probs) == 1 and probs[0] > 0.5

    def test_predict_empty_batch(self):
        resp = _oracle_client().post("/v1/predict", json={"texts": []})
        assert resp.status_code == 200
        assert resp.json() == {"probs": []}

    def test_fillmask_contract(self):
        client = _oracle_client()
        resp = client.post("/v1/fillmask", json={
            "tokens": ["a", "deep", "and", "meaningful", "film", "."],
            "index": 1,
            "top_k": 2,
        })
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["tokens"]) == len(body["logits"]) <= 2
        assert body["logits"] == sorted(body["logits"], reverse=True)

    def test_perplexity(self):
        resp = _oracle_client().post("/v1/perplexity", json={"texts": ["a deep film ."]})
        assert resp.status_code == 200
        assert resp.json()["ppls"][0] > 0

    @pytest.mark.parametrize("body", [
        {"texts": "not-a-list"},
        {"texts": [""]},
        {},
    ])
    def test_predict_malformed_input_400(self, body):
        resp = _oracle_client().post("/v1/predict", json=body)
        assert resp.status_code == 400
        assert "error" in resp.json()

    @pytest.mark.parametrize("body", [
        {"tokens": [], "index": 0, "top_k": 5},
        {"tokens": ["a", "b"], "index": 9, "top_k": 5},
        {"tokens": ["a", "b"], "index": 0, "top_k": 0},
        {"tokens": ["a", "b"], "index": True, "top_k": 5},
    ])
    def test_fillmask_malformed_input_400(self, body):
        resp = _oracle_client().post("/v1/fillmask", json=body)
        assert resp.status_code == 400

    def test_unavailable_backend_maps_to_503(self):
        class Flaky:
            def predict_soft(self, batch):
                raise OracleUnavailable("model is loading")

        corpus = [("a", "b")]
        app = create_oracle_app(Flaky(), BigramFillMask(corpus), BigramPerplexity(corpus))
        resp = TestClient(app, raise_server_exceptions=False).post(
            "/v1/predict", json={"texts": ["a"]}
        )
        assert resp.status_code == 503
        assert "error" in resp.json()


class TestThinClientCli:
    def test_server_run_matches_in_process(self, tmp_path):
        dataset = tmp_path / "dev.jsonl"
        dataset.write_text(
            "".join(json.dumps(line) + "\n" for line in DATASET), encoding="utf-8"
        )
        pairs = tmp_path / "pairs.tsv"
        pairs.write_text("film\tmovie\nbad\tunhealthy\ndeep\tprofound\n", encoding="utf-8")
        args = [
            "attack", "--dataset", str(dataset), "--synonyms", str(pairs),
            "--method", "so-beam", "--k", "2", "--beam", "5",
            "--kappa", "10", "--delta", "6", "--seed", "7",
        ]
        local_out = tmp_path / "local.json"
        assert main(args + ["--out", str(local_out)]) == 0
        with AppServer(create_audit_app()) as url:
            remote_out = tmp_path / "remote.json"
            assert main(args + ["--out", str(remote_out), "--server", url]) == 0
        local = strip_volatile(json.loads(local_out.read_text(encoding="utf-8")))
        remote = strip_volatile(json.loads(remote_out.read_text(encoding="utf-8")))
        # provenance differs (paths vs inline); everything else must agree
        local["config"].pop("dataset_path"), remote["config"].pop("dataset_path")
        local["config"].pop("split"), remote["config"].pop("split")
        local["config"].pop("pairs_path", None), local["config"].pop("blacklist_path", None)
        assert local == remote
