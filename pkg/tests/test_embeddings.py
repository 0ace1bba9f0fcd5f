import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bitext.corpus import SentencePair
from bitext.embeddings import (
    FileEmbedder,
    MockEmbedder,
    ScoredPair,
    ServiceEmbedder,
    calibrate_from_scores,
    calibrate_threshold,
    cosine,
    filter_by_threshold,
    read_embedding_file,
    read_scored_tsv,
    score_pairs,
    text_hash,
    unit_normalize,
    write_embedding_file,
    write_scored_tsv,
)
from bitext.errors import (
    MissingEmbeddingError,
    ProviderError,
    StructuralError,
    ValidationError,
)

from conftest import make_corpus

finite_vec = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=2, max_size=6
)


def test_cosine_self_similarity():
    assert cosine([1.0, 2.0, -3.0], [1.0, 2.0, -3.0]) == pytest.approx(1.0)


def test_cosine_orthogonal():
    assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0


def test_cosine_worked_value():
    assert cosine([1, 2, 2], [2, 1, 2]) == pytest.approx(8 / 9, abs=1e-9)


def test_cosine_zero_vector_convention():
    assert cosine([0.0, 0.0], [1.0, 1.0]) == 0.0


def test_cosine_dimension_mismatch():
    with pytest.raises(StructuralError):
        cosine([1.0], [1.0, 2.0])


@given(finite_vec)
def test_cosine_bounds_and_symmetry(u):
    v = [x + 1.0 for x in u]
    assert cosine(u, v) == cosine(v, u)
    assert -1.0 <= cosine(u, v) <= 1.0


def test_cosine_scale_invariance():
    u, v = [1.0, 2.0, 3.0], [0.5, -1.0, 2.0]
    base = cosine(u, v)
    for c in (1e-6, 0.5, 3.0, 1e6):
        assert cosine([c * x for x in u], v) == pytest.approx(base, abs=1e-9)


def test_mock_determinism():
    a = MockEmbedder(dim=8, seed=3)
    b = MockEmbedder(dim=8, seed=3)
    va, vb = a.embed_batch(["hello"])[0], b.embed_batch(["hello"])[0]
    assert np.array_equal(va, vb)
    assert np.linalg.norm(va) == pytest.approx(1.0, abs=1e-6)


def test_mock_seed_changes_vectors():
    a = MockEmbedder(dim=8, seed=1).embed_batch(["hello"])[0]
    b = MockEmbedder(dim=8, seed=2).embed_batch(["hello"])[0]
    assert not np.array_equal(a, b)


def test_mock_registered_pair_is_identical():
    mock = MockEmbedder(dim=8, seed=0)
    mock.register_pair("hello", "namaste")
    u, v = mock.embed_batch(["hello", "namaste"])
    assert np.array_equal(u, v)
    assert cosine(u, v) == 1.0


def test_mock_empty_text_is_zero_vector():
    mock = MockEmbedder(dim=4, seed=0)
    assert np.array_equal(mock.embed_batch([""])[0], np.zeros(4))


def test_mock_rejects_tiny_dim():
    with pytest.raises(ValidationError):
        MockEmbedder(dim=1)


def test_mock_unregistered_pairs_score_near_zero(rng):
    mock = MockEmbedder(dim=256, seed=5)
    sims = []
    for k in range(1000):
        u, v = mock.embed_batch([f"left {k}", f"right {k}"])
        sims.append(cosine(u, v))
    mean = sum(sims) / len(sims)
    assert abs(mean) < 0.02
    assert max(abs(s) for s in sims) < 0.35


def test_score_pairs_identity_text():
    corpus = make_corpus([("abc", "abc")])
    scored = score_pairs(corpus, MockEmbedder(dim=8, seed=0))
    assert scored[0].similarity == pytest.approx(1.0)


def test_score_pairs_empty_side_scores_zero():
    corpus = make_corpus([("", "x")])
    assert score_pairs(corpus, MockEmbedder(dim=8, seed=0))[0].similarity == 0.0


def test_score_pairs_batch_invariance():
    rows = [(f"s{i}", f"t{i}") for i in range(10)]
    corpus = make_corpus(rows)
    mock = MockEmbedder(dim=8, seed=1)
    by_one = score_pairs(corpus, mock, batch_size=1)
    by_three = score_pairs(corpus, mock, batch_size=3)
    assert [sp.pair.id for sp in by_three] == list(range(10))
    assert [sp.similarity for sp in by_one] == [sp.similarity for sp in by_three]


def test_score_pairs_reports_failed_batch_range():
    class Exploding(MockEmbedder):
        def embed_batch(self, texts):
            if "s3" in texts:
                raise ProviderError("boom")
            return super().embed_batch(texts)

    corpus = make_corpus([(f"s{i}", f"t{i}") for i in range(7)])
    with pytest.raises(ProviderError, match=r"3\.\.5"):
        score_pairs(corpus, Exploding(dim=8), batch_size=3)


def scored_from(sims):
    return [ScoredPair(SentencePair(i, f"s{i}", f"t{i}"), s) for i, s in enumerate(sims)]


def test_filter_threshold_lower_bound_keeps_all():
    scored = scored_from([-1.0, 0.0, 0.5])
    assert len(filter_by_threshold(scored, -1.0)) == 3


def test_filter_threshold_inclusive():
    scored = scored_from([0.95, 0.9, 0.85])
    kept = filter_by_threshold(scored, 0.9)
    assert [p.id for p in kept.pairs] == [0, 1]


def test_filter_threshold_operating_point():
    scored = scored_from([0.95, 0.85])
    assert len(filter_by_threshold(scored, 0.9)) == 1


def test_filter_threshold_monotone_and_idempotent(rng):
    sims = [rng.uniform(-1, 1) for _ in range(500)]
    scored = scored_from(sims)
    previous = None
    for tau in (-1.0, -0.5, 0.0, 0.8, 0.9, 1.0):
        kept = filter_by_threshold(scored, tau)
        kept_ids = {p.id for p in kept.pairs}
        refiltered = filter_by_threshold(
            [ScoredPair(p, sims[p.id]) for p in kept.pairs], tau
        )
        assert {p.id for p in refiltered.pairs} == kept_ids
        if previous is not None:
            assert kept_ids <= previous
        previous = kept_ids


def test_calibrate_identical_pairs():
    mock = MockEmbedder(dim=8, seed=0)
    reference = make_corpus([("same", "same"), ("also", "also")])
    assert calibrate_threshold(reference, mock).threshold == pytest.approx(1.0)


def test_calibrate_mean_and_margin():
    scored = scored_from([0.8, 1.0])
    assert calibrate_from_scores(scored).threshold == pytest.approx(0.9)
    result = calibrate_from_scores(scored, margin=0.05)
    assert result.threshold == pytest.approx(0.85)
    assert result.mean == pytest.approx(0.9)
    assert result.min == 0.8 and result.max == 1.0


def test_calibrate_empty_reference_rejected():
    with pytest.raises(ValidationError):
        calibrate_threshold(make_corpus([]), MockEmbedder(dim=8))


def test_embedding_file_round_trip(tmp_path):
    vectors = {text_hash(f"t{i}"): [float(i), 0.5, -1.25] for i in range(20)}
    path = tmp_path / "emb.txt"
    write_embedding_file(vectors, 3, path)
    dim, back = read_embedding_file(path)
    assert dim == 3
    assert set(back) == set(vectors)
    for key, vec in vectors.items():
        assert list(back[key]) == vec


def test_file_embedder_serves_and_normalizes(tmp_path):
    path = tmp_path / "emb.txt"
    write_embedding_file({text_hash("a"): [2.0, 0.0, 0.0, 0.0]}, 4, path)
    provider = FileEmbedder(path)
    assert list(provider.embed_batch(["a"])[0]) == [1.0, 0.0, 0.0, 0.0]


def test_file_embedder_batch_invariance(tmp_path):
    texts = [f"t{i}" for i in range(9)]
    path = tmp_path / "emb.txt"
    write_embedding_file(
        {text_hash(t): [float(i + 1), 1.0, -0.5] for i, t in enumerate(texts)}, 3, path
    )
    provider = FileEmbedder(path)
    corpus = make_corpus([(t, t) for t in texts])
    by_two = score_pairs(corpus, provider, batch_size=2)
    by_five = score_pairs(corpus, provider, batch_size=5)
    assert [sp.similarity for sp in by_two] == [sp.similarity for sp in by_five]


def test_file_embedder_missing_text(tmp_path):
    path = tmp_path / "emb.txt"
    write_embedding_file({text_hash("a"): [1.0, 0.0]}, 2, path)
    provider = FileEmbedder(path)
    with pytest.raises(MissingEmbeddingError, match=text_hash("missing")):
        provider.embed_batch(["missing"])


def test_embedding_file_bad_header(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("dimension 4\n", encoding="utf-8")
    with pytest.raises(Exception, match="dim N"):
        read_embedding_file(path)


def test_unit_normalize_rejects_nan():
    with pytest.raises(ValidationError):
        unit_normalize([float("nan"), 1.0])


def test_scored_tsv_round_trip(tmp_path):
    scored = scored_from([0.123456789, -0.5])
    path = tmp_path / "scores.tsv"
    write_scored_tsv(scored, path, decimals=-1)
    back = read_scored_tsv(path)
    assert [(sp.pair.id, sp.similarity) for sp in back] == [
        (sp.pair.id, sp.similarity) for sp in scored
    ]
    write_scored_tsv(scored, path)
    assert path.read_text().splitlines()[0] == "0\t0.123457\ts0\tt0"


class _StubHandler(BaseHTTPRequestHandler):
    dim = 4
    fail_first = 0

    def log_message(self, *args):
        pass

    def do_GET(self):
        if self.path == "/healthz":
            self._respond(200, {"status": "ok", "dim": self.dim, "model": "stub"})
        else:
            self._respond(404, {"error": "not found"})

    def do_POST(self):
        if type(self).fail_first > 0:
            type(self).fail_first -= 1
            self._respond(500, {"error": "transient"})
            return
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        texts = body["texts"]
        # deliberately NOT normalized: client must normalize
        embeddings = [[float(len(t) + 1), 0.0, 0.0, 0.0] for t in texts]
        self._respond(200, {"dim": self.dim, "embeddings": embeddings})

    def _respond(self, code, payload):
        data = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


@pytest.fixture
def stub_service():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def test_service_embedder_handshake_and_normalization(stub_service):
    provider = ServiceEmbedder(stub_service, timeout=5, retries=0)
    assert provider.dim == 4
    assert provider.model == "stub"
    vec = provider.embed_batch(["ab"])[0]
    assert list(vec) == [1.0, 0.0, 0.0, 0.0]
    assert list(provider.embed_batch([""])[0]) == [0.0, 0.0, 0.0, 0.0]


def test_service_embedder_retries_then_succeeds(stub_service):
    _StubHandler.fail_first = 1
    provider = ServiceEmbedder(stub_service, timeout=5, retries=2)
    assert len(provider.embed_batch(["x"])) == 1


def test_service_embedder_unreachable():
    with pytest.raises(ProviderError):
        ServiceEmbedder("http://127.0.0.1:9", timeout=0.2, retries=0)
