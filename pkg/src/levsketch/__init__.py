"""Leverage scores for large dense matrices via randomized sketching.

Exact scores come from a thin SVD; approximate scores come from the SVD of a
much smaller sketched product built in a streaming row model (CountSketch,
OSNAP, or SRHT), optionally with small singular components truncated before
basis inversion so rank-deficient and noise-corrupted data stay accurate.
A coordinator-model simulation distributes the sketching across row
partitions, and an ordering generator turns scores into per-epoch curriculum
orderings for training loops.
"""

__version__ = "0.1.0"

from . import errors
from .dist import CoordinatorReport, Partition, partition_rows, run_distributed
from .leverage import (
    LeverageResult,
    leverage_exact,
    leverage_oracle,
    leverage_sketched,
    leverage_sketched_trunc,
    load_scores,
    save_scores,
)
from .matrix import (
    SyntheticSpec,
    as_matrix,
    gen_synthetic,
    load_matrix,
    numerical_rank,
    save_matrix,
    singular_values,
)
from .order import (
    OrderingPlan,
    OrderingPolicy,
    emit_batches,
    make_plan,
    scores_to_distribution,
)
from .sketch import (
    SketchSpec,
    SketchState,
    apply_sketch,
    consume_rows,
    fwht,
    load_state,
    merge,
    save_state,
    sketch_matrix,
    sketch_rows,
    srht_apply,
    stream_update,
)
from .svd import SvdResult, thin_svd, truncate

__all__ = [
    "CoordinatorReport",
    "LeverageResult",
    "OrderingPlan",
    "OrderingPolicy",
    "Partition",
    "SketchSpec",
    "SketchState",
    "SvdResult",
    "SyntheticSpec",
    "__version__",
    "apply_sketch",
    "as_matrix",
    "consume_rows",
    "emit_batches",
    "errors",
    "fwht",
    "gen_synthetic",
    "leverage_exact",
    "leverage_oracle",
    "leverage_sketched",
    "leverage_sketched_trunc",
    "load_matrix",
    "load_scores",
    "load_state",
    "make_plan",
    "merge",
    "numerical_rank",
    "partition_rows",
    "run_distributed",
    "save_matrix",
    "save_scores",
    "save_state",
    "scores_to_distribution",
    "singular_values",
    "sketch_matrix",
    "sketch_rows",
    "srht_apply",
    "stream_update",
    "thin_svd",
    "truncate",
]
