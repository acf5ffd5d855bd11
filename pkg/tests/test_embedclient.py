import math
import re

import numpy as np
import pytest

from semtab.embedclient import (
    EmbedEndpointConfig,
    EmbeddingRecord,
    embed_remote,
    mock_embed,
    mock_embed_records,
)
from semtab.errors import BatchError, ProtocolError
from semtab.fusion import enrich_mcc
from semtab.prompts import render_mcc
from semtab.synthworld import WorldConfig, generate_world

from mockserver import MockEmbedServer


class TestMockEmbed:
    def test_deterministic(self):
        a = mock_embed("some prompt text", 64, seed=3)
        b = mock_embed("some prompt text", 64, seed=3)
        assert np.array_equal(a, b)

    def test_unit_norm(self):
        for text in ("hello", "a b c d e", "MCC 5044 equipment"):
            v = mock_embed(text, 32, seed=1)
            assert abs(np.linalg.norm(v) - 1.0) <= 1e-6

    def test_token_free_prompt_maps_to_e0(self):
        v = mock_embed("!!! --- ???", 16, seed=0)
        expected = np.zeros(16, dtype=np.float32)
        expected[0] = 1.0
        assert np.array_equal(v, expected)

    def test_seed_changes_vectors(self):
        a = mock_embed("same text", 64, seed=1)
        b = mock_embed("same text", 64, seed=2)
        assert not np.array_equal(a, b)

    def test_dim_floor(self):
        with pytest.raises(ValueError):
            mock_embed("x", 4)

    def test_cluster_cosine_ordering_on_world_kb(self):
        # independent bag-of-words oracle: token multisets and exact cosine
        world = generate_world(WorldConfig(n_clusters=3, mccs_per_cluster=4,
                                           n_merchants=24, n_cities=4,
                                           n_regions=2), seed=5)

        def prompt_of(code):
            return render_mcc(enrich_mcc(code, world.kb)).text

        def bow_cosine(a, b):
            ta = re.findall(r"[0-9a-z]+", a.lower())
            tb = re.findall(r"[0-9a-z]+", b.lower())
            ca = {t: ta.count(t) for t in set(ta)}
            cb = {t: tb.count(t) for t in set(tb)}
            dot = sum(ca[t] * cb.get(t, 0) for t in ca)
            na = math.sqrt(sum(v * v for v in ca.values()))
            nb = math.sqrt(sum(v * v for v in cb.values()))
            return dot / (na * nb)

        by_cluster = {}
        for code in world.mcc_codes:
            by_cluster.setdefault(world.mcc_cluster[code], []).append(code)
        same_a, same_b = by_cluster[0][0], by_cluster[0][1]
        cross = by_cluster[1][0]
        pa, pb, pc = prompt_of(same_a), prompt_of(same_b), prompt_of(cross)

        # oracle agrees that same-cluster prompts share more tokens
        assert bow_cosine(pa, pb) > bow_cosine(pa, pc)

        def cos(u, v):
            return float(np.dot(u, v))

        va, vb, vc = (mock_embed(p, 256, seed=0) for p in (pa, pb, pc))
        assert cos(va, vb) > cos(va, vc)

    def test_cosine_symmetric_and_bounded(self):
        texts = ["alpha beta", "beta gamma", "delta", "alpha alpha beta"]
        vecs = [mock_embed(t, 32, seed=7) for t in texts]
        for u in vecs:
            for v in vecs:
                c = float(np.dot(u, v))
                assert -1.0 - 1e-6 <= c <= 1.0 + 1e-6
                assert abs(c - float(np.dot(v, u))) <= 1e-9


class TestEmbeddingRecord:
    def test_shape_validation(self):
        with pytest.raises(ProtocolError):
            EmbeddingRecord(key="k", prompt_fingerprint=1, model_id="m", dim=4,
                            vector=np.zeros(5, dtype=np.float32))

    def test_non_finite_rejected(self):
        with pytest.raises(ProtocolError):
            EmbeddingRecord(key="k", prompt_fingerprint=1, model_id="m", dim=2,
                            vector=np.array([1.0, np.nan], dtype=np.float32))


class TestEmbedRemote:
    def test_three_prompts_three_records(self):
        prompts = [("k0", "first prompt"), ("k1", "second"), ("k2", "third one")]
        with MockEmbedServer(dim=32) as server:
            cfg = EmbedEndpointConfig(base_url=server.base_url, batch_size=2)
            records = embed_remote(prompts, cfg)
        assert [r.key for r in records] == ["k0", "k1", "k2"]
        assert {r.dim for r in records} == {32}
        assert {r.model_id for r in records} == {"mock-http"}

    def test_retry_recovers_from_one_500(self):
        prompts = [("k0", "alpha"), ("k1", "beta")]
        with MockEmbedServer(dim=16, fail_first=1) as server:
            cfg = EmbedEndpointConfig(base_url=server.base_url, batch_size=8,
                                      max_attempts=2, backoff_s=0.01)
            records = embed_remote(prompts, cfg)
        assert len(records) == 2

    def test_exhausted_retries_name_indices(self):
        prompts = [(f"k{i}", f"text {i}") for i in range(5)]
        with MockEmbedServer(dim=16, fail_first=100) as server:
            cfg = EmbedEndpointConfig(base_url=server.base_url, batch_size=2,
                                      max_attempts=2, backoff_s=0.0)
            with pytest.raises(BatchError) as err:
                embed_remote(prompts, cfg)
        assert err.value.failed_indices == [0, 1, 2, 3, 4]

    def test_batched_equals_singleton(self):
        prompts = [("a", "short"), ("b", "a much longer prompt with many words"),
                   ("c", "mid size text")]
        with MockEmbedServer(dim=32) as server:
            batched = embed_remote(prompts, EmbedEndpointConfig(
                base_url=server.base_url, batch_size=3))
            singles = [embed_remote([p], EmbedEndpointConfig(
                base_url=server.base_url, batch_size=1))[0] for p in prompts]
        for got, want in zip(batched, singles):
            assert np.array_equal(got.vector, want.vector)

    def test_matches_in_process_mock(self):
        prompts = [("a", "token soup"), ("b", "another prompt")]
        with MockEmbedServer(dim=64, seed=0) as server:
            remote = embed_remote(prompts, EmbedEndpointConfig(base_url=server.base_url))
        local = mock_embed_records(prompts, dim=64, seed=0)
        for r, l in zip(remote, local):
            assert np.allclose(r.vector, l.vector, atol=1e-6)

    def test_empty_prompts_rejected(self):
        with pytest.raises(ValueError):
            embed_remote([], EmbedEndpointConfig(base_url="http://localhost:1"))
