import numpy as np
import pytest
from fastapi.testclient import TestClient

from bitpassage import __version__
from bitpassage.service.app import create_app


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Generate -> train -> build index once; served by every test below."""
    root = tmp_path_factory.mktemp("svc")
    client = TestClient(create_app())

    gen = client.post("/data/generate", json={
        "out_dir": str(root / "data"),
        "n_passages": 400, "input_dims": 16, "clusters": 8,
        "train_instances": 64, "eval_queries": 10, "seed": 5,
    })
    assert gen.status_code == 200, gen.text
    paths = gen.json()

    trained = client.post("/train", json={
        "data_path": paths["train_path"],
        "out_path": str(root / "model.ckpt"),
        "epochs": 4, "batch_size": 32, "code_dims": 24, "seed": 5,
    })
    assert trained.status_code == 200, trained.text

    built = client.post("/index/build", json={
        "model_path": str(root / "model.ckpt"),
        "corpus_path": paths["corpus_path"],
        "out_path": str(root / "corpus.idx"),
        "hash_bits": 6,
    })
    assert built.status_code == 200, built.text

    loaded = client.post("/engines", json={
        "name": "main",
        "index_path": str(root / "corpus.idx"),
        "model_path": str(root / "model.ckpt"),
        "hash_bits": 6,
    })
    assert loaded.status_code == 200, loaded.text
    return client, root, paths, built.json(), loaded.json()


def test_health(workspace):
    client = workspace[0]
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "version": __version__}


def test_build_reports_exact_payload_bytes(workspace):
    _, _, _, built, _ = workspace
    assert built["count"] == 400
    assert built["dims"] == 24
    assert built["payload_bytes"] == 400 * 1 * 8


def test_engine_listing(workspace):
    client = workspace[0]
    resp = client.get("/engines")
    names = [e["name"] for e in resp.json()["engines"]]
    assert "main" in names
    info = workspace[4]
    assert info["has_model"] and info["hash_bits"] == 6


def test_search_with_features_and_embeddings(workspace):
    client, root, paths, _, _ = workspace
    rng = np.random.default_rng(1)
    features = rng.standard_normal((2, 16)).tolist()
    resp = client.post("/engines/main/search", json={
        "queries": features, "l": 100, "k": 5,
    })
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert len(body["results"]) == 2
    first = body["results"][0]
    assert [h["rank"] for h in first] == [1, 2, 3, 4, 5]
    assert all(h["score"] is not None and h["hamming"] is not None for h in first)
    # scores non-increasing
    scores = [h["score"] for h in first]
    assert scores == sorted(scores, reverse=True)

    # same queries, algo=hash with l=N must agree with scan at l=N
    scan = client.post("/engines/main/search", json={
        "queries": features, "l": 400, "k": 5, "algo": "scan",
    }).json()
    hashed = client.post("/engines/main/search", json={
        "queries": features, "l": 400, "k": 5, "algo": "hash",
    }).json()
    assert scan["results"] == hashed["results"]

    emb = rng.standard_normal((1, 24)).tolist()
    resp = client.post("/engines/main/search", json={
        "queries": emb, "l": 50, "k": 3, "queries_are_embeddings": True,
    })
    assert resp.status_code == 200


def test_search_is_deterministic(workspace):
    client = workspace[0]
    q = np.linspace(-1, 1, 16)[None, :].tolist()
    a = client.post("/engines/main/search", json={"queries": q, "l": 64, "k": 8}).json()
    b = client.post("/engines/main/search", json={"queries": q, "l": 64, "k": 8}).json()
    assert a == b


def test_no_rerank_mode_omits_scores(workspace):
    client = workspace[0]
    q = np.linspace(-1, 1, 16)[None, :].tolist()
    resp = client.post("/engines/main/search", json={
        "queries": q, "l": 32, "k": 4, "mode": "no_rerank",
    })
    assert all(h["score"] is None for h in resp.json()["results"][0])


def test_error_mapping(workspace):
    client, root, paths, _, _ = workspace
    q = np.linspace(-1, 1, 16)[None, :].tolist()

    assert client.post("/engines/nope/search", json={"queries": q}).status_code == 404

    resp = client.post("/engines/main/search", json={"queries": q, "l": 10, "k": 20})
    assert resp.status_code == 422  # k > l

    resp = client.post("/engines/main/search", json={"queries": q, "mode": "bogus", "l": 5, "k": 2})
    assert resp.status_code == 422

    resp = client.post("/engines/main/search", json={
        "queries": [[1.0, 2.0]], "l": 5, "k": 2, "queries_are_embeddings": True,
    })
    assert resp.status_code == 422  # embedding dims mismatch

    # corrupt index file -> 400 with a format error detail
    bad = root / "bad.idx"
    raw = bytearray((root / "corpus.idx").read_bytes())
    raw[40] ^= 0xFF
    bad.write_bytes(bytes(raw))
    resp = client.post("/engines", json={"name": "bad", "index_path": str(bad)})
    assert resp.status_code == 400
    assert "checksum" in resp.json()["detail"].lower()

    resp = client.post("/data/generate", json={
        "out_dir": str(root / "bad-gen"), "n_passages": 0,
    })
    assert resp.status_code == 422


def test_unload_engine(workspace):
    client, root, _, _, _ = workspace
    client.post("/engines", json={"name": "temp", "index_path": str(root / "corpus.idx")})
    assert client.delete("/engines/temp").status_code == 200
    assert client.delete("/engines/temp").status_code == 404
