from .grid import (
    METRIC_COLUMNS,
    ComparisonTable,
    DataBundle,
    RunConfig,
    run_grid,
    run_single,
)
from .metrics import (
    AmountMetrics,
    ClassMetrics,
    MetricReport,
    accuracy,
    evaluate,
    macro_f1,
    mean_absolute_error,
    merchant_accuracy_on,
    relative_improvement,
    smape,
)
from .strategies import (
    STRATEGIES,
    CacheSource,
    EntityDirectory,
    MockSource,
    build_strategy_tables,
    field_prompts,
    prompt_for_value,
)
from .training import EpochStats, TrainParams, TrainResult, train

__all__ = [
    "METRIC_COLUMNS", "ComparisonTable", "DataBundle", "RunConfig", "run_grid",
    "run_single", "AmountMetrics", "ClassMetrics", "MetricReport", "accuracy",
    "evaluate", "macro_f1", "mean_absolute_error", "merchant_accuracy_on",
    "relative_improvement", "smape", "STRATEGIES", "CacheSource",
    "EntityDirectory", "MockSource", "build_strategy_tables", "field_prompts",
    "prompt_for_value", "EpochStats", "TrainParams", "TrainResult", "train",
]
