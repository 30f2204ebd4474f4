"""Score aggregation, attention rollout, visual dumps, and the
cached-vs-vanilla throughput benchmark."""

from .attention import (AttentionRollout, attention_rollout,
                        rollout_from_model, token_labels, write_rollout)
from .bench import (BenchComparison, BenchResult, BenchSettings,
                    compare_bench, throughput_bench, token_counts)
from .dumps import (DecodeShapeError, composite_stack, dump_frame_stack,
                    dump_trajectory, frame_strip, stack_tints)
from .metrics import (AggregateReport, EmptyTableError, NormalizationError,
                      ScoreTable, aggregates, bundled_method_table,
                      bundled_references, bundled_stage_table, fraction_above,
                      fraction_above_csv, interquartile_mean, normalized_score,
                      optimality_gap, score_table_from_files)

__all__ = [
    "AggregateReport", "AttentionRollout", "BenchComparison", "BenchResult",
    "BenchSettings", "DecodeShapeError", "EmptyTableError",
    "NormalizationError", "ScoreTable", "aggregates", "attention_rollout",
    "bundled_method_table", "bundled_references", "bundled_stage_table",
    "compare_bench", "composite_stack", "dump_frame_stack", "dump_trajectory",
    "fraction_above", "fraction_above_csv", "frame_strip",
    "interquartile_mean", "normalized_score", "optimality_gap",
    "rollout_from_model", "score_table_from_files", "stack_tints",
    "throughput_bench", "token_counts", "token_labels", "write_rollout",
]
