import numpy as np
import pytest

from semtab.batching import vocabs_from_log, vocabs_from_world
from semtab.errors import ConfigurationError, EmptyBatchError
from semtab.model import ModelConfig, init_model
from semtab.synthworld import WorldConfig, generate_log, generate_world
from semtab.traineval import (
    DataBundle,
    EntityDirectory,
    MockSource,
    RunConfig,
    TrainParams,
    build_strategy_tables,
    evaluate,
    field_prompts,
    merchant_accuracy_on,
    run_grid,
    train,
)
from semtab.traineval.grid import (
    VANILLA_LABEL,
    CellResult,
    ComparisonTable,
    apply_baseline_comparison,
)
from semtab.txndata import SplitSpec, split_by_time

SMALL_MODEL = ModelConfig(
    d_fields={"mcc": 8, "merchant": 12, "city": 8, "state": 4},
    d_amount=4, d_tdelta=4, n_tdelta_buckets=16,
    d_model=32, n_layers=1, n_heads=2, d_ff=64, max_seq_len=16,
)


@pytest.fixture(scope="module")
def bundle():
    world = generate_world(WorldConfig(n_clusters=3, mccs_per_cluster=3,
                                       n_merchants=30, n_cities=5, n_regions=2),
                           seed=2)
    log = generate_log(world, n_users=100, seq_len_range=(8, 16), months=6, seed=2)
    train_log, val_log, test_log = split_by_time(log, SplitSpec(4, 1, 1))
    return DataBundle(
        train=train_log, val=val_log, test=test_log,
        vocabs=vocabs_from_world(world), kb=world.kb,
        directory=EntityDirectory.from_world(world),
    ), world


class TestVocabs:
    def test_world_vocab_covers_log(self, bundle):
        data, world = bundle
        from_log = vocabs_from_log(data.train)
        for field in ("mcc", "merchant", "city", "state"):
            assert set(from_log.values[field]) <= set(data.vocabs.values[field])

    def test_specials_first(self, bundle):
        data, _ = bundle
        for field, values in data.vocabs.values.items():
            assert values[0] == "[NULL]" and values[1] == "[OOV]"


class TestStrategyTables:
    def test_all_fields_builds_four_tables(self, bundle):
        data, _ = bundle
        tables = build_strategy_tables(
            "all_fields", data.vocabs, data.kb, data.directory,
            MockSource(dim=64), SMALL_MODEL.d_fields)
        assert set(tables) == {"mcc", "merchant", "city", "state"}
        for field, table in tables.items():
            assert table.matrix.shape == (data.vocabs.size(field),
                                          SMALL_MODEL.d_fields[field])

    def test_vanilla_builds_none(self, bundle):
        data, _ = bundle
        tables = build_strategy_tables(
            "vanilla", data.vocabs, data.kb, data.directory,
            MockSource(dim=64), SMALL_MODEL.d_fields)
        assert tables == {}

    def test_unknown_strategy_rejected(self, bundle):
        data, _ = bundle
        with pytest.raises(ConfigurationError):
            build_strategy_tables("everything", data.vocabs, data.kb,
                                  data.directory, MockSource(dim=64),
                                  SMALL_MODEL.d_fields)

    def test_prompt_keys_cover_vocab(self, bundle):
        data, _ = bundle
        prompts = field_prompts("merchant", data.vocabs, data.kb, data.directory)
        assert len(prompts) == data.vocabs.size("merchant") - 2
        assert all(k.startswith("merchant:") for k, _ in prompts)

    def test_wrapped_prompts_differ(self, bundle):
        data, _ = bundle
        plain = field_prompts("mcc", data.vocabs, data.kb, data.directory, wrap=False)
        wrapped = field_prompts("mcc", data.vocabs, data.kb, data.directory, wrap=True)
        assert all(w[1].startswith("This sentence: '") for w in wrapped)
        assert plain[0][1] in wrapped[0][1].replace("''", "'")


class TestTrain:
    def test_zero_epochs_returns_initialized_model(self, bundle):
        data, _ = bundle
        model = init_model(SMALL_MODEL, data.vocabs.values, seed=0)
        before = {k: v.copy() for k, v in model.params.items()}
        result = train(model, data.train, data.val, data.vocabs,
                       TrainParams(epochs=0, seed=0))
        assert result.history == []
        for name, p in result.model.params.items():
            assert np.array_equal(p, before[name])

    def test_three_epochs_bookkeeping(self, bundle):
        data, _ = bundle
        model = init_model(SMALL_MODEL, data.vocabs.values, seed=0)
        result = train(model, data.train, data.val, data.vocabs,
                       TrainParams(epochs=3, seed=0))
        assert len(result.history) == 3
        assert [s.epoch for s in result.history] == [0, 1, 2]
        best_so_far = np.minimum.accumulate([s.val_loss for s in result.history])
        assert all(b <= a + 1e-12 for a, b in zip(best_so_far, best_so_far[1:]))
        assert 0 <= result.best_epoch < 3
        best_acc = max(s.val_report.next_mcc.acc for s in result.history)
        assert result.history[result.best_epoch].val_report.next_mcc.acc == best_acc

    def test_deterministic_history(self, bundle):
        data, _ = bundle
        runs = []
        for _ in range(2):
            model = init_model(SMALL_MODEL, data.vocabs.values, seed=3)
            result = train(model, data.train, data.val, data.vocabs,
                           TrainParams(epochs=2, seed=3))
            runs.append([(s.train_loss, s.val_loss, s.val_report.to_dict())
                         for s in result.history])
        assert runs[0] == runs[1]


class TestEvaluate:
    def test_report_shape_and_ranges(self, bundle):
        data, _ = bundle
        model = init_model(SMALL_MODEL, data.vocabs.values, seed=0)
        report = evaluate(model, data.test, data.vocabs)
        d = report.to_dict()
        assert d["n_positions"] > 0
        for task in ("next_mcc", "next_city", "next_merchant", "anomaly"):
            assert 0.0 <= d[task]["acc"] <= 1.0
            assert 0.0 <= d[task]["macro_f1"] <= 1.0
        assert d["next_amount"]["mae"] >= 0.0
        assert 0.0 <= d["next_amount"]["smape"] <= 1.0

    def test_empty_log_raises(self, bundle):
        data, _ = bundle
        model = init_model(SMALL_MODEL, data.vocabs.values, seed=0)
        from semtab.txndata import TransactionLog
        single = TransactionLog([data.test.transactions[0]])
        with pytest.raises(EmptyBatchError):
            evaluate(model, single, data.vocabs)

    def test_merchant_subset_accuracy(self, bundle):
        data, world = bundle
        model = init_model(SMALL_MODEL, data.vocabs.values, seed=0)
        subset = set(list(world.merchants)[:5])
        acc, n = merchant_accuracy_on(model, data.test, data.vocabs, subset)
        assert 0.0 <= acc <= 1.0 and n > 0


def _fake_cell(strategy, source, metrics):
    cell = CellResult(strategy=strategy, source_label=source)
    cell.mean_test = metrics
    cell.seed_reports = [{"test": metrics}]
    return cell


def _metrics(mae, smape_v, accs, anom_f1=0.5):
    return {
        "next_amount": {"mae": mae, "smape": smape_v},
        "next_mcc": {"acc": accs, "macro_f1": accs / 2},
        "next_city": {"acc": accs, "macro_f1": accs / 2},
        "next_merchant": {"acc": accs, "macro_f1": accs / 2},
        "anomaly": {"acc": 0.9, "macro_f1": anom_f1},
        "n_positions": 100,
    }


class TestFlags:
    def test_orientation(self):
        vanilla = _fake_cell("vanilla", VANILLA_LABEL, _metrics(10.0, 0.4, 0.5))
        better_mae = _fake_cell("mcc", "mock", _metrics(9.0, 0.5, 0.4, anom_f1=0.6))
        worse_mae = _fake_cell("merchant", "mock", _metrics(11.0, 0.3, 0.6, anom_f1=0.4))
        table = ComparisonTable(
            cells={(VANILLA_LABEL, "vanilla"): vanilla,
                   ("mock", "mcc"): better_mae,
                   ("mock", "merchant"): worse_mae},
            row_order=[(VANILLA_LABEL, "vanilla"), ("mock", "mcc"),
                       ("mock", "merchant")],
        )
        apply_baseline_comparison(table)
        assert all(v is False for v in vanilla.flags.values())
        assert better_mae.flags["amount_mae"] is True     # lower MAE flagged
        assert better_mae.flags["amount_smape"] is False  # higher sMAPE not
        assert better_mae.flags["mcc_acc"] is False
        assert worse_mae.flags["amount_mae"] is False     # higher MAE not
        assert worse_mae.flags["mcc_acc"] is True
        assert better_mae.anomaly_ri == pytest.approx(20.0)
        assert worse_mae.anomaly_ri == pytest.approx(-20.0)


class TestRunGrid:
    def test_vanilla_only_single_row(self, bundle):
        data, _ = bundle
        table = run_grid(["vanilla"], [MockSource(dim=32)], [0], data,
                         SMALL_MODEL, RunConfig(strategy="vanilla", epochs=1))
        assert len(table.row_order) == 1
        cell = table.cells[table.row_order[0]]
        assert cell.strategy == "vanilla"
        assert all(v is False for v in cell.flags.values())

    def test_two_strategies_three_seeds(self, bundle):
        data, _ = bundle
        table = run_grid(["vanilla", "mcc"], [MockSource(dim=32)], [0, 1, 2],
                         data, SMALL_MODEL, RunConfig(strategy="vanilla", epochs=1))
        assert len(table.row_order) == 2
        mcc_cell = table.cells[("mock(dim=32)", "mcc")]
        assert len(mcc_cell.seed_reports) == 3
        assert mcc_cell.mean_test is not None
        # mean over seeds, not a single run
        accs = [r["test"]["next_mcc"]["acc"] for r in mcc_cell.seed_reports]
        assert mcc_cell.mean_test["next_mcc"]["acc"] == pytest.approx(np.mean(accs))

    def test_vanilla_required_exactly_once(self, bundle):
        data, _ = bundle
        with pytest.raises(ConfigurationError):
            run_grid(["mcc"], [MockSource(dim=32)], [0], data, SMALL_MODEL)
        with pytest.raises(ConfigurationError):
            run_grid(["vanilla", "vanilla"], [MockSource(dim=32)], [0], data,
                     SMALL_MODEL)

    def test_grid_determinism(self, bundle):
        data, _ = bundle
        import json
        dumps = []
        for _ in range(2):
            table = run_grid(["vanilla", "state+city"], [MockSource(dim=32)],
                             [1], data, SMALL_MODEL,
                             RunConfig(strategy="vanilla", epochs=1))
            dumps.append(json.dumps(table.to_dict(), sort_keys=True))
        assert dumps[0] == dumps[1]

    def test_failed_cell_recorded_grid_completes(self, bundle):
        data, _ = bundle

        class BrokenSource:
            def label(self):
                return "broken"

            def records_for(self, prompts):
                raise RuntimeError("source offline")

        table = run_grid(["vanilla", "mcc"], [BrokenSource()], [0], data,
                         SMALL_MODEL, RunConfig(strategy="vanilla", epochs=1))
        cell = table.cells[("broken", "mcc")]
        assert cell.errors and cell.mean_test is None
        vanilla = table.cells[(VANILLA_LABEL, "vanilla")]
        assert vanilla.mean_test is not None

    def test_render_formats(self, bundle):
        data, _ = bundle
        table = run_grid(["vanilla", "mcc"], [MockSource(dim=32)], [0], data,
                         SMALL_MODEL, RunConfig(strategy="vanilla", epochs=1))
        text = table.render_text()
        assert "strategy" in text and "vanilla" in text and "mcc" in text
        csv = table.render_csv()
        assert csv.splitlines()[0].startswith("source,strategy,amount_mae")
        ri = table.render_ri_text()
        assert "vanilla" not in ri.splitlines()[1] if len(ri.splitlines()) > 1 else True
