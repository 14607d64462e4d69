import json
import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from treesent.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def train_request(data_dir, tmp_path, **overrides):
    req = {
        "train_path": str(data_dir / "toy_train.txt"),
        "dev_path": str(data_dir / "toy_dev.txt"),
        "dict_path": str(data_dir / "toy_dict.txt"),
        "checkpoint_path": str(tmp_path / "ckpt"),
        "hidden_dim": 10,
        "word_dim": 8,
        "epochs": 3,
        "seed": 2,
        "lr": 0.05,
        "labels": "binary",
        "classifier": "concat",
    }
    req.update(overrides)
    return req


class TestHealth:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"


class TestTrainEndpoint:
    def test_train_writes_artifacts(self, client, data_dir, tmp_path):
        resp = client.post("/train", json=train_request(data_dir, tmp_path))
        assert resp.status_code == 200
        body = resp.json()
        assert body["epochs_run"] == 3
        assert 0.0 <= body["best_dev_accuracy"] <= 1.0
        assert (tmp_path / "ckpt.json").exists()
        assert (tmp_path / "ckpt.bin").exists()
        metrics = (tmp_path / "ckpt.metrics.jsonl").read_text().splitlines()
        assert len(metrics) == 3
        first = json.loads(metrics[0])
        assert first["schema"] == "treesent/metrics-v1"
        assert set(first) == {"schema", "epoch", "train_loss", "dev_acc"}

    def test_missing_file_is_400(self, client, tmp_path):
        resp = client.post("/train", json={
            "train_path": str(tmp_path / "missing.txt"),
            "dev_path": str(tmp_path / "missing.txt"),
            "checkpoint_path": str(tmp_path / "ckpt"),
        })
        assert resp.status_code == 400

    def test_bad_label_names_line(self, client, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("(P (x a) (x b))\n(9 (x a) (x b))\n", encoding="utf-8")
        resp = client.post("/train", json={
            "train_path": str(bad),
            "dev_path": str(bad),
            "checkpoint_path": str(tmp_path / "ckpt"),
            "labels": "binary",
            "epochs": 1,
            "hidden_dim": 4,
            "word_dim": 4,
        })
        assert resp.status_code == 400
        assert "line 2" in resp.json()["detail"]

    def test_validation_error_is_422(self, client, tmp_path):
        resp = client.post("/train", json={"train_path": 5})
        assert resp.status_code == 422


class TestEvalEndpoint:
    def test_eval_matches_recorded_best_dev(self, client, data_dir, tmp_path):
        train_body = client.post(
            "/train", json=train_request(data_dir, tmp_path)).json()
        resp = client.post("/evaluate", json={
            "checkpoint_path": str(tmp_path / "ckpt"),
            "trees_path": str(data_dir / "toy_dev.txt"),
        })
        assert resp.status_code == 200
        body = resp.json()
        assert body["n"] == 8
        assert body["accuracy"] == train_body["best_dev_accuracy"]

    def test_empty_test_file_is_400(self, client, data_dir, tmp_path):
        client.post("/train", json=train_request(data_dir, tmp_path))
        empty = tmp_path / "empty.txt"
        empty.write_text("", encoding="utf-8")
        resp = client.post("/evaluate", json={
            "checkpoint_path": str(tmp_path / "ckpt"),
            "trees_path": str(empty),
        })
        assert resp.status_code == 400

    def test_corrupted_blob_is_400_with_shape_mismatch(self, client, data_dir,
                                                       tmp_path):
        client.post("/train", json=train_request(data_dir, tmp_path))
        blob = tmp_path / "ckpt.bin"
        blob.write_bytes(blob.read_bytes()[:-24])
        resp = client.post("/evaluate", json={
            "checkpoint_path": str(tmp_path / "ckpt"),
            "trees_path": str(data_dir / "toy_dev.txt"),
        })
        assert resp.status_code == 400
        assert "shape mismatch" in resp.json()["detail"]


class TestAttentionEndpoint:
    def test_records_have_normalized_weights(self, client, data_dir, tmp_path):
        client.post("/train", json=train_request(data_dir, tmp_path))
        resp = client.post("/attention", json={
            "checkpoint_path": str(tmp_path / "ckpt"),
            "trees_path": str(data_dir / "toy_dev.txt"),
            "include_dot": True,
        })
        assert resp.status_code == 200
        records = resp.json()["records"]
        assert len(records) == 8
        for record in records:
            total = sum(e["weight"] for e in record["attention"])
            assert abs(total - 1.0) < 1e-6
            assert abs(sum(record["distribution"]) - 1.0) < 1e-9
            assert record["dot"].startswith("digraph")

    def test_inline_trees(self, client, data_dir, tmp_path):
        client.post("/train", json=train_request(data_dir, tmp_path))
        resp = client.post("/attention", json={
            "checkpoint_path": str(tmp_path / "ckpt"),
            "trees": ["(P (x (x excellent) (x service)) (x today))"],
        })
        assert resp.status_code == 200
        assert len(resp.json()["records"]) == 1

    def test_single_token_sentence_has_empty_attention(self, client, data_dir,
                                                       tmp_path):
        client.post("/train", json=train_request(data_dir, tmp_path))
        resp = client.post("/attention", json={
            "checkpoint_path": str(tmp_path / "ckpt"),
            "trees": ["(P excellent)"],
        })
        record = resp.json()["records"][0]
        assert record["attention"] == []

    def test_hidden_checkpoint_rejected(self, client, data_dir, tmp_path):
        client.post("/train", json=train_request(
            data_dir, tmp_path, classifier="hidden",
            checkpoint_path=str(tmp_path / "hid")))
        resp = client.post("/attention", json={
            "checkpoint_path": str(tmp_path / "hid"),
            "trees_path": str(data_dir / "toy_dev.txt"),
        })
        assert resp.status_code == 400
        assert "attention is disabled" in resp.json()["detail"]


class TestGradcheckEndpoint:
    def test_passes_by_default(self, client):
        resp = client.post("/gradcheck", json={"seed": 1, "instances": 1})
        assert resp.status_code == 200
        body = resp.json()
        assert body["passed"] is True
        assert all(c["passed"] for c in body["checks"])

    def test_corrupt_op_fails(self, client):
        resp = client.post("/gradcheck", json={"seed": 1, "instances": 1,
                                               "corrupt_op": True})
        assert resp.status_code == 200
        assert resp.json()["passed"] is False
