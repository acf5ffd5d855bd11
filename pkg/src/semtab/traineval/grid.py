"""Initialization-strategy comparison grid and relative-improvement report.

The grid mirrors the shape of the paper-style comparison: one row per
(embedding source, strategy) with eight prediction-task metric columns, a
better-than-vanilla flag per cell, and a separate relative-improvement table
for the anomaly-assessment task (reported only as RI against the vanilla
run). Cells are keyed, not appended, so assembly order never matters, and a
failed run is recorded in its cell without aborting the rest of the grid.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from ..batching import Vocabularies
from ..errors import ConfigurationError
from ..fusion import KnowledgeBase
from ..model import ModelConfig, init_model
from ..txndata import TransactionLog
from .metrics import evaluate, merchant_accuracy_on, relative_improvement
from .strategies import STRATEGIES, EntityDirectory, build_strategy_tables
from .training import TrainParams, train

VANILLA_LABEL = "-"

# (column id, path into the report dict, lower-is-better)
METRIC_COLUMNS = (
    ("amount_mae", ("next_amount", "mae"), True),
    ("amount_smape", ("next_amount", "smape"), True),
    ("mcc_acc", ("next_mcc", "acc"), False),
    ("mcc_f1", ("next_mcc", "macro_f1"), False),
    ("city_acc", ("next_city", "acc"), False),
    ("city_f1", ("next_city", "macro_f1"), False),
    ("merchant_acc", ("next_merchant", "acc"), False),
    ("merchant_f1", ("next_merchant", "macro_f1"), False),
)


@dataclass(frozen=True)
class RunConfig:
    strategy: str
    epochs: int = 3
    batch_size: int = 64
    lr: float = 1e-3
    lr_schedule: str = "constant"
    seeds: tuple[int, ...] = (0, 1, 2)
    projection_seed: int = 0
    wrap_one_word: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(
                f"unknown strategy {self.strategy!r}; expected one of {sorted(STRATEGIES)}")


@dataclass(frozen=True)
class DataBundle:
    train: TransactionLog
    val: TransactionLog
    test: TransactionLog
    vocabs: Vocabularies
    kb: KnowledgeBase
    directory: EntityDirectory
    cold_merchants: frozenset[str] = frozenset()


@dataclass
class CellResult:
    strategy: str
    source_label: str
    seed_reports: list[dict] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    mean_test: dict | None = None
    mean_cold_start_acc: float | None = None
    flags: dict[str, bool] = field(default_factory=dict)
    anomaly_ri: float | None = None

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "source": self.source_label,
            "seed_reports": self.seed_reports,
            "errors": self.errors,
            "mean_test": self.mean_test,
            "mean_cold_start_acc": self.mean_cold_start_acc,
            "flags": self.flags,
            "anomaly_ri": self.anomaly_ri,
        }


@dataclass
class ComparisonTable:
    cells: dict[tuple[str, str], CellResult]
    row_order: list[tuple[str, str]]

    def to_dict(self) -> dict:
        return {"rows": [self.cells[k].to_dict() for k in self.row_order]}

    def render_text(self) -> str:
        headers = ["source", "strategy"] + [c for c, _, _ in METRIC_COLUMNS]
        rows = [headers]
        for key in self.row_order:
            cell = self.cells[key]
            row = [cell.source_label, cell.strategy]
            if cell.mean_test is None:
                row += ["failed"] * len(METRIC_COLUMNS)
            else:
                for col, path, _ in METRIC_COLUMNS:
                    value = cell.mean_test[path[0]][path[1]]
                    mark = "*" if cell.flags.get(col) else " "
                    row.append(f"{value:.4f}{mark}")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
                 for row in rows]
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines) + "\n"

    def render_csv(self) -> str:
        header = "source,strategy," + ",".join(c for c, _, _ in METRIC_COLUMNS)
        lines = [header]
        for key in self.row_order:
            cell = self.cells[key]
            if cell.mean_test is None:
                lines.append(f"{cell.source_label},{cell.strategy}," +
                             ",".join([""] * len(METRIC_COLUMNS)))
                continue
            values = [f"{cell.mean_test[p[0]][p[1]]:.6f}" for _, p, _ in METRIC_COLUMNS]
            lines.append(f"{cell.source_label},{cell.strategy}," + ",".join(values))
        return "\n".join(lines) + "\n"

    def render_ri_text(self) -> str:
        lines = ["anomaly assessment relative improvement vs vanilla (Eq. 1)"]
        for key in self.row_order:
            cell = self.cells[key]
            if cell.strategy == "vanilla":
                continue
            ri = "n/a" if cell.anomaly_ri is None else f"{cell.anomaly_ri:+.2f}%"
            lines.append(f"  {cell.source_label:<20} {cell.strategy:<14} {ri}")
        return "\n".join(lines) + "\n"


def _mean_dicts(reports: list[dict]) -> dict:
    out: dict = {}
    for task, metrics in reports[0].items():
        if isinstance(metrics, dict):
            out[task] = {k: sum(r[task][k] for r in reports) / len(reports)
                         for k in metrics}
        else:
            out[task] = sum(r[task] for r in reports) / len(reports)
    return out


def run_single(data: DataBundle, cfg: RunConfig, source,
               model_cfg: ModelConfig, seed: int) -> dict:
    """Train one model under a strategy and evaluate the test split once."""
    tables = {}
    if STRATEGIES[cfg.strategy]:
        tables = build_strategy_tables(
            cfg.strategy, data.vocabs, data.kb, data.directory, source,
            model_cfg.d_fields, projection_seed=cfg.projection_seed,
            init_scale=model_cfg.init_scale,
            wrap_one_word_prompts=cfg.wrap_one_word)
    model = init_model(model_cfg, data.vocabs.values, tables, seed=seed)
    result = train(model, data.train, data.val, data.vocabs,
                   TrainParams(epochs=cfg.epochs, batch_size=cfg.batch_size,
                               lr=cfg.lr, lr_schedule=cfg.lr_schedule, seed=seed))
    test_report = evaluate(result.model, data.test, data.vocabs, cfg.batch_size)
    report = {
        "strategy": cfg.strategy,
        "source": source.label() if STRATEGIES[cfg.strategy] else VANILLA_LABEL,
        "seed": seed,
        "best_epoch": result.best_epoch,
        "val": (result.history[result.best_epoch].val_report.to_dict()
                if result.history else None),
        "test": test_report.to_dict(),
        "history": [s.to_dict() for s in result.history],
    }
    if data.cold_merchants:
        acc, n = merchant_accuracy_on(result.model, data.test, data.vocabs,
                                      data.cold_merchants, cfg.batch_size)
        report["cold_start"] = {"acc": acc, "n_positions": n}
    return report


def run_grid(strategies: list[str], sources: list, seeds: list[int],
             data: DataBundle, model_cfg: ModelConfig,
             base_cfg: RunConfig | None = None) -> ComparisonTable:
    """Full comparison: every (source, strategy) cell averaged over seeds,
    flagged against the vanilla baseline, plus the anomaly RI column."""
    if strategies.count("vanilla") != 1:
        raise ConfigurationError("strategies must include vanilla exactly once")
    base = base_cfg or RunConfig(strategy="vanilla")

    cells: dict[tuple[str, str], CellResult] = {}
    row_order: list[tuple[str, str]] = []
    for strategy in strategies:
        strat_sources = [None] if strategy == "vanilla" else sources
        for source in strat_sources:
            label = VANILLA_LABEL if source is None else source.label()
            key = (label, strategy)
            cell = CellResult(strategy=strategy, source_label=label)
            cfg = dataclasses.replace(base, strategy=strategy, seeds=tuple(seeds))
            for seed in seeds:
                try:
                    cell.seed_reports.append(
                        run_single(data, cfg, source, model_cfg, seed))
                except Exception as exc:  # cell-level containment
                    cell.errors.append(f"seed {seed}: {type(exc).__name__}: {exc}")
            if cell.seed_reports:
                cell.mean_test = _mean_dicts([r["test"] for r in cell.seed_reports])
                cold = [r["cold_start"]["acc"] for r in cell.seed_reports
                        if "cold_start" in r]
                if cold:
                    cell.mean_cold_start_acc = sum(cold) / len(cold)
            cells[key] = cell
            row_order.append(key)

    table = ComparisonTable(cells=cells, row_order=row_order)
    apply_baseline_comparison(table)
    return table


def apply_baseline_comparison(table: ComparisonTable) -> None:
    """Fill better-than-vanilla flags (orientation-aware) and the anomaly RI
    column. The vanilla row's flags are all false by definition."""
    baseline = table.cells[(VANILLA_LABEL, "vanilla")].mean_test
    for key in table.row_order:
        cell = table.cells[key]
        if cell.strategy == "vanilla" or cell.mean_test is None or baseline is None:
            cell.flags = {col: False for col, _, _ in METRIC_COLUMNS}
            continue
        for col, path, lower_better in METRIC_COLUMNS:
            ours = cell.mean_test[path[0]][path[1]]
            base_v = baseline[path[0]][path[1]]
            cell.flags[col] = ours < base_v if lower_better else ours > base_v
        base_anom = baseline["anomaly"]["macro_f1"]
        if base_anom > 0:
            cell.anomaly_ri = relative_improvement(
                cell.mean_test["anomaly"]["macro_f1"], base_anom)
