import pytest

from semtab.batching import (
    NULL_INDEX,
    OOV_INDEX,
    Vocabularies,
    batches_for_eval,
    collate,
    make_windows,
    tdelta_bucket,
    vocabs_from_log,
    vocabs_from_world,
)
from semtab.errors import EmptyBatchError
from semtab.model import ModelConfig
from semtab.synthworld import WorldConfig, generate_log, generate_world
from semtab.txndata import Transaction, TransactionLog

CFG = ModelConfig(d_fields={"mcc": 8, "merchant": 8, "city": 8, "state": 8},
                  d_model=16, n_layers=1, n_heads=2, d_ff=32, max_seq_len=4,
                  n_tdelta_buckets=8)


def _txn(user, ts, merchant="M1", mcc="5411", city="Troy", state="Michigan",
         amount=10.0, anomaly=False):
    return Transaction(user_id=user, ts=ts, amount=amount, merchant_raw=merchant,
                       mcc=mcc, city=city, state_or_region=state, country="USA",
                       anomaly=anomaly)


@pytest.fixture()
def vocabs():
    return Vocabularies(values={
        "mcc": ("[NULL]", "[OOV]", "5411", "5814"),
        "merchant": ("[NULL]", "[OOV]", "M1", "M2"),
        "city": ("[NULL]", "[OOV]", "Troy"),
        "state": ("[NULL]", "[OOV]", "Michigan"),
    })


class TestVocabularies:
    def test_encode_known_and_oov(self, vocabs):
        assert vocabs.encode("mcc", "5411") == 2
        assert vocabs.encode("mcc", "0000") == OOV_INDEX
        assert vocabs.encode("mcc", "[NULL]") == NULL_INDEX

    def test_decode_round_trip(self, vocabs):
        for field in vocabs.values:
            for i, v in enumerate(vocabs.values[field]):
                assert vocabs.encode(field, v) == i
                assert vocabs.decode(field, i) == v

    def test_specials_enforced(self):
        with pytest.raises(ValueError):
            Vocabularies(values={"mcc": ("a", "b")})


class TestTdeltaBucket:
    def test_zero_delta_bucket_zero(self):
        assert tdelta_bucket(0, 8) == 0

    def test_monotone_in_delta(self):
        buckets = [tdelta_bucket(d, 24) for d in (1, 60, 3600, 86400, 30 * 86400)]
        assert buckets == sorted(buckets)
        assert len(set(buckets)) == len(buckets)

    def test_clipped_at_top(self):
        assert tdelta_bucket(10 ** 12, 8) == 7


class TestWindows:
    def test_targets_cross_window_boundaries(self, vocabs):
        # 6 transactions, window size 4: the 4th position's target must be
        # the 5th transaction even though it lives in the next window
        txns = [_txn("u", 1000 + i * 100, merchant="M1" if i % 2 == 0 else "M2")
                for i in range(6)]
        log = TransactionLog(txns)
        windows = make_windows(log, vocabs, CFG)
        assert [len(w) for w in windows] == [4, 2]
        first, second = windows
        assert first.target_mask == [1.0, 1.0, 1.0, 1.0]
        # last window position's target is the next transaction's merchant
        assert first.target_tokens["merchant"][3] == vocabs.encode("merchant", "M1")
        assert second.target_mask == [1.0, 0.0]

    def test_tdelta_uses_global_sequence(self, vocabs):
        txns = [_txn("u", 1000), _txn("u", 1000 + 3600), _txn("u", 1000 + 3600 + 60),
                _txn("u", 1000 + 3600 + 120), _txn("u", 1000 + 3600 + 7200)]
        log = TransactionLog(txns)
        windows = make_windows(log, vocabs, CFG)
        # window 2 starts at position 4; its delta reaches back to position 3
        assert windows[1].tdelta[0] == tdelta_bucket(7200 - 120, CFG.n_tdelta_buckets)
        assert windows[0].tdelta[0] == 0

    def test_unknown_values_map_to_oov(self, vocabs):
        log = TransactionLog([_txn("u", 1000, merchant="UNSEEN SHOP"),
                              _txn("u", 2000)])
        windows = make_windows(log, vocabs, CFG)
        assert windows[0].tokens["merchant"][0] == OOV_INDEX

    def test_window_cache_reuses_results(self, vocabs):
        log = TransactionLog([_txn("u", 1000), _txn("u", 2000)])
        a = make_windows(log, vocabs, CFG)
        b = make_windows(log, vocabs, CFG)
        assert a is b


class TestCollate:
    def test_padding_shapes_and_masks(self, vocabs):
        log = TransactionLog([_txn("u1", 1000), _txn("u1", 2000), _txn("u1", 3000),
                              _txn("u2", 1500)])
        windows = make_windows(log, vocabs, CFG)
        batch = collate(windows)
        B, T = batch.shape
        assert (B, T) == (2, 3)
        assert batch.input_mask.tolist() == [[1, 1, 1], [1, 0, 0]]
        assert batch.target_mask.tolist() == [[1, 1, 0], [0, 0, 0]]

    def test_empty_collate_raises(self):
        with pytest.raises(EmptyBatchError):
            collate([])

    def test_eval_batches_cover_all_windows(self, vocabs):
        world = generate_world(WorldConfig(n_clusters=2, mccs_per_cluster=2,
                                           n_merchants=10, n_cities=3,
                                           n_regions=1), seed=0)
        log = generate_log(world, n_users=10, seq_len_range=(3, 9), months=3, seed=0)
        wv = vocabs_from_world(world)
        batches = batches_for_eval(log, wv, CFG, batch_size=4)
        total = sum(b.input_mask.sum() for b in batches)
        assert total == len(log)


class TestVocabBuilders:
    def test_from_log_cleans_values(self):
        log = TransactionLog([_txn("u", 1000, merchant="  SPACED   NAME ")])
        v = vocabs_from_log(log)
        assert "SPACED NAME" in v.values["merchant"]

    def test_from_world_includes_all_merchants(self):
        world = generate_world(WorldConfig(n_clusters=2, mccs_per_cluster=2,
                                           n_merchants=12, n_cities=3,
                                           n_regions=1), seed=1)
        v = vocabs_from_world(world)
        assert v.size("merchant") == 12 + 2
        assert v.size("mcc") == 4 + 2
