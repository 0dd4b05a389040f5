import math

import pytest

import weightforge as wf


def test_blobs_shape_and_balance():
    ds = wf.make_blobs(classes=2, per_class=50, dims=3, spread=0.4, seed=5)
    assert len(ds) == 100
    assert ds.features.shape == (100, 3)
    assert sum(1 for label in ds.labels if label == 0) == 50


def test_split_sizes_and_determinism():
    ds = wf.make_blobs(classes=2, per_class=50, dims=2, spread=0.5, seed=11)
    train, val, test = wf.split(ds, train=0.8, val=0.1, test=0.1, seed=4)
    assert (len(train), len(val), len(test)) == (80, 10, 10)
    train2, _, _ = wf.split(ds, train=0.8, val=0.1, test=0.1, seed=4)
    assert (train.features == train2.features).all()


def test_mlp_training_and_forward():
    ds = wf.make_blobs(classes=2, per_class=40, dims=2, spread=0.15, seed=9)
    network, trace = wf.sgd_train_mlp(
        ds, ds, hidden=8, epochs=30, batch_size=16, learning_rate=0.1, seed=1
    )
    assert len(trace) == 30
    report = wf.evaluate(network, ds)
    assert report["accuracy"] > 0.95

    logits = wf.mlp_forward(network, ds.features)
    assert logits.shape == (80, 2)
    row = [math.exp(v) for v in logits[0]]
    assert abs(sum(v / sum(row) for v in row) - 1.0) < 1e-12


def test_network_round_trip(tmp_path):
    ds = wf.make_blobs(classes=3, per_class=20, dims=2, spread=0.5, seed=2)
    network, _ = wf.sgd_train_mlp(ds, ds, hidden=4, epochs=3, seed=7)
    path = str(tmp_path / "net.wfnn")
    network.save(path)
    loaded = wf.load_network(path)
    assert loaded.kind == "mlp"
    assert loaded.tensor_names == network.tensor_names
    assert (loaded.tensor("output.weight") == network.tensor("output.weight")).all()


def test_lstm_on_toy_sentiment():
    corpus = wf.make_toy_sentiment(vocab_size=24, samples=150, max_len=8, seed=3)
    network, _ = wf.sgd_train_lstm(
        corpus, corpus, embedding=8, hidden=12, epochs=15, learning_rate=0.1, seed=5
    )
    report = wf.evaluate_tokens(network, corpus)
    assert report["accuracy"] > 0.8
    logits = wf.lstm_forward(network, corpus.sequences[0])
    assert len(logits) == 2


def test_optimize_sphere_with_python_fitness():
    result = wf.optimize(
        lambda x: sum(v * v for v in x),
        lower=[-5.0] * 4,
        upper=[5.0] * 4,
        algorithm="pso",
        agents=30,
        iterations=40,
        seed=1,
    )
    assert result["best_fitness"] < 0.05
    assert result["evaluations"] == 30 * 41
    assert all(-5.0 <= v <= 5.0 for v in result["best_position"])

    anchored = wf.optimize(
        lambda x: sum(v * v for v in x),
        lower=[-1.0] * 3,
        upper=[1.0] * 3,
        algorithm="ga",
        agents=10,
        iterations=5,
        seed=2,
        anchor=[0.0, 0.0, 0.0],
    )
    assert anchored["best_fitness"] == 0.0


def test_extract_theta_default_selector():
    ds = wf.make_blobs(classes=3, per_class=20, dims=2, spread=0.5, seed=2)
    network, _ = wf.sgd_train_mlp(ds, ds, hidden=5, epochs=2, seed=1)
    theta = wf.extract_theta(network)
    assert theta.shape == (5 * 3,)
    with_biases = wf.extract_theta(network, include_biases=True)
    assert with_biases.shape == (5 * 3 + 3,)


def test_run_experiment_pipeline():
    config = {
        "dataset": {
            "type": "blobs",
            "classes": 3,
            "per_class": 40,
            "dims": 2,
            "spread": 0.6,
            "seed": 17,
        },
        "split": {"train": 0.6, "val": 0.2, "test": 0.2},
        "model": {"type": "mlp", "hidden": 8},
        "train": {"epochs": 8, "batch_size": 16, "learning_rate": 0.1},
        "finetune": {"algorithm": "ga", "preset": "alpha", "delta": 0.001},
        "output_dir": "unused",
    }
    report = wf.run_experiment(config, seed=1)
    assert report["post"]["val_accuracy"] >= report["pre"]["val_accuracy"]
    assert report["split_reads"]["test"] == 2
    assert len(report["optimization"]["trace"]) == 5
    assert "timing" in report


def test_wilcoxon_and_metrics():
    outcome = wf.wilcoxon_signed_rank([1.1, 1.2, 1.3, 1.4, 1.5, 1.6],
                                      [0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    assert outcome["p_value"] == pytest.approx(2.0 / 64.0, abs=1e-15)
    assert outcome["significant"]

    report = wf.classify_metrics([0, 0, 1, 1], [0, 1, 1, 1], classes=2)
    assert report["accuracy"] == 0.75
    assert report["precision"] == pytest.approx(5.0 / 6.0)

    agg = wf.aggregate_runs([0.0, 1.0])
    assert agg["mean"] == 0.5
    assert agg["stddev"] == pytest.approx(math.sqrt(0.5))


def test_cost_model():
    estimate = wf.estimate_cost(
        iota=1.0, zeta=0.1, pretrain_iterations=50, optimize_iterations=5, agents=10
    )
    assert estimate["total"] == pytest.approx(60.0)
    vanishing = wf.estimate_cost(
        iota=1.0, zeta=0.0, pretrain_iterations=50, optimize_iterations=5, agents=10
    )
    assert vanishing["total"] == pytest.approx(50.0)


def test_errors_surface_as_python_exceptions():
    with pytest.raises(wf.WeightforgeError):
        wf.make_blobs(classes=0, per_class=10, dims=2, spread=0.1, seed=1)
    with pytest.raises(wf.WeightforgeError):
        wf.wilcoxon_signed_rank([1.0], [1.0, 2.0])
