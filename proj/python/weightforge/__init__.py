"""Gradient pre-training plus GA/PSO fine-tuning of selected network weights."""

from weightforge._core import (
    Network,
    TabularDataset,
    TokenDataset,
    WeightforgeError,
    __version__,
    aggregate_runs,
    classify_metrics,
    estimate_cost,
    evaluate,
    evaluate_tokens,
    extract_theta,
    load_cifar_batch,
    load_csv,
    load_network,
    load_token_corpus,
    lstm_forward,
    make_blobs,
    make_toy_sentiment,
    mlp_forward,
    optimize,
    run_experiment,
    sgd_train_lstm,
    sgd_train_mlp,
    split,
    split_tokens,
    wilcoxon_signed_rank,
)

__all__ = [
    "Network",
    "TabularDataset",
    "TokenDataset",
    "WeightforgeError",
    "__version__",
    "aggregate_runs",
    "classify_metrics",
    "estimate_cost",
    "evaluate",
    "evaluate_tokens",
    "extract_theta",
    "load_cifar_batch",
    "load_csv",
    "load_network",
    "load_token_corpus",
    "lstm_forward",
    "make_blobs",
    "make_toy_sentiment",
    "mlp_forward",
    "optimize",
    "run_experiment",
    "sgd_train_lstm",
    "sgd_train_mlp",
    "split",
    "split_tokens",
    "wilcoxon_signed_rank",
]
