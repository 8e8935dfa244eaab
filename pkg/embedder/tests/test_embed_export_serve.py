import json
import urllib.error
import urllib.request

import pytest
import torch

from faqembed import DataError
from faqembed.export import encode_texts, export_vectors
from faqembed.model import HashEmbedder
from faqembed.server import serve_embeddings


@pytest.fixture(scope="module")
def model():
    torch.manual_seed(7)
    return HashEmbedder(n_buckets=512, dim=32, query_prefix="query: ",
                        passage_prefix="passage: ", model_name="unit-model")


def post(port, payload, raw=False):
    body = payload if raw else json.dumps(payload).encode("utf-8")
    request = urllib.request.Request(
        f"http://127.0.0.1:{port}/embed", data=body,
        headers={"Content-Type": "application/json"},
    )
    try:
        with urllib.request.urlopen(request) as response:
            return response.status, json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read().decode("utf-8"))


class TestExport:
    def test_file_shape(self, model, tmp_path):
        out = tmp_path / "vectors.jsonl"
        count = export_vectors(
            model, ["a", "b", "c"], ["पहिलो पाठ", "दोस्रो पाठ", "तेस्रो पाठ"],
            kind="passage", out_path=out,
        )
        assert count == 3
        lines = out.read_text(encoding="utf-8").splitlines()
        header = json.loads(lines[0])
        assert header == {"dim": 32, "count": 3, "normalized": True, "model": "unit-model"}
        assert len(lines) == 4
        record = json.loads(lines[1])
        assert record["_id"] == "a"
        assert len(record["vector"]) == 32

    def test_duplicate_ids_rejected(self, model, tmp_path):
        with pytest.raises(DataError, match="duplicate"):
            export_vectors(model, ["x", "x"], ["पाठ एक", "पाठ दुई"],
                           kind="passage", out_path=tmp_path / "v.jsonl")

    def test_deterministic(self, model, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        export_vectors(model, ["i1"], ["नमूना"], kind="query", out_path=a)
        export_vectors(model, ["i1"], ["नमूना"], kind="query", out_path=b)
        assert a.read_bytes() == b.read_bytes()

    def test_kind_prefix_applied(self, model):
        q = encode_texts(model, ["पाठ"], "query")
        p = encode_texts(model, ["पाठ"], "passage")
        assert not torch.allclose(q, p)


class TestServer:
    def test_two_texts(self, model):
        server, _ = serve_embeddings(model)
        try:
            port = server.server_address[1]
            status, body = post(port, {"texts": ["पहिलो", "दोस्रो"], "kind": "query"})
            assert status == 200
            assert body["dim"] == 32
            assert len(body["vectors"]) == 2
            assert all(len(v) == 32 for v in body["vectors"])
        finally:
            server.shutdown()

    def test_kind_omitted_400(self, model):
        server, _ = serve_embeddings(model)
        try:
            port = server.server_address[1]
            status, body = post(port, {"texts": ["पाठ"]})
            assert status == 400
            assert "kind" in body["error"]
        finally:
            server.shutdown()

    def test_malformed_body_400(self, model):
        server, _ = serve_embeddings(model)
        try:
            port = server.server_address[1]
            assert post(port, b"{not json", raw=True)[0] == 400
            assert post(port, {"texts": "not-a-list", "kind": "query"})[0] == 400
            assert post(port, {"texts": ["ok"], "kind": "sentence"})[0] == 400
        finally:
            server.shutdown()

    def test_unknown_path_404(self, model):
        server, _ = serve_embeddings(model)
        try:
            port = server.server_address[1]
            request = urllib.request.Request(
                f"http://127.0.0.1:{port}/other", data=b"{}",
                headers={"Content-Type": "application/json"},
            )
            with pytest.raises(urllib.error.HTTPError) as excinfo:
                urllib.request.urlopen(request)
            assert excinfo.value.code == 404
        finally:
            server.shutdown()

    def test_served_equals_encoded(self, model):
        server, _ = serve_embeddings(model)
        try:
            port = server.server_address[1]
            texts = ["नमूना पाठ", "अर्को नमूना"]
            _, body = post(port, {"texts": texts, "kind": "passage"})
            direct = encode_texts(model, texts, "passage")
            for served_row, direct_row in zip(body["vectors"], direct):
                for s, d in zip(served_row, direct_row):
                    assert s == pytest.approx(float(d), abs=1e-9)
        finally:
            server.shutdown()
