#include "weightforge/finetune.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "weightforge/errors.hpp"

namespace wf::finetune {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool selector_matches(const LayerSelector& selector,
                      const model::Tensor& tensor) {
  const bool layer_selected =
      std::find(selector.layers.begin(), selector.layers.end(), tensor.layer) !=
      selector.layers.end();
  if (!layer_selected) {
    return false;
  }
  return tensor.kind == model::TensorKind::weight || selector.include_biases;
}

void validate_selector(const model::NetworkState& state,
                       const LayerSelector& selector) {
  if (selector.layers.empty()) {
    throw SelectorError("selector: no layers named");
  }
  for (const auto& layer : selector.layers) {
    const bool known =
        std::any_of(state.tensors.begin(), state.tensors.end(),
                    [&](const model::Tensor& t) { return t.layer == layer; });
    if (!known) {
      throw SelectorError("selector: unknown layer '" + layer + "'");
    }
  }
}

std::vector<int> true_labels(const AnyDataset& split) {
  return std::visit([](const auto& ds) { return ds.labels; }, split);
}

int class_count(const AnyDataset& split) {
  return std::visit([](const auto& ds) { return ds.class_count; }, split);
}

std::size_t split_size(const AnyDataset& split) {
  return std::visit([](const auto& ds) { return ds.size(); }, split);
}

}  // namespace

void DeltaSpec::validate() const {
  if (values.empty()) {
    throw ConfigError("DeltaSpec: empty");
  }
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError("DeltaSpec: every delta must be a positive finite value");
    }
  }
}

ParameterVector extract_theta(const model::NetworkState& state,
                              const LayerSelector& selector) {
  validate_selector(state, selector);
  ParameterVector theta;
  for (const auto& tensor : state.tensors) {
    if (!selector_matches(selector, tensor)) {
      continue;
    }
    LayoutEntry entry;
    entry.name = tensor.name;
    entry.rows = tensor.value.rows;
    entry.cols = tensor.value.cols;
    entry.offset = theta.values.size();
    theta.layout.push_back(entry);
    theta.values.insert(theta.values.end(), tensor.value.data.begin(),
                        tensor.value.data.end());
  }
  if (theta.values.empty()) {
    throw SelectorError("selector: selection matches no parameters");
  }
  return theta;
}

model::NetworkState inject_theta(const model::NetworkState& state,
                                 const ParameterVector& theta) {
  model::NetworkState injected = state;
  for (const auto& entry : theta.layout) {
    auto& tensor = injected.tensor(entry.name);
    if (tensor.value.rows != entry.rows || tensor.value.cols != entry.cols) {
      throw DimensionError("inject_theta: layout shape mismatch for " +
                           entry.name);
    }
    if (entry.offset + entry.rows * entry.cols > theta.values.size()) {
      throw DimensionError("inject_theta: layout overruns the value vector");
    }
    std::copy_n(theta.values.begin() + static_cast<std::ptrdiff_t>(entry.offset),
                entry.rows * entry.cols, tensor.value.data.begin());
  }
  return injected;
}

optim::Bounds build_space(const ParameterVector& theta, const DeltaSpec& delta) {
  delta.validate();
  if (!delta.is_scalar() && delta.values.size() != theta.size()) {
    throw ConfigError("build_space: delta vector length " +
                      std::to_string(delta.values.size()) +
                      " does not match theta length " +
                      std::to_string(theta.size()));
  }
  optim::Bounds bounds;
  bounds.lower.resize(theta.size());
  bounds.upper.resize(theta.size());
  for (std::size_t d = 0; d < theta.size(); ++d) {
    const double half_width = delta.is_scalar() ? delta.values[0] : delta.values[d];
    bounds.lower[d] = theta.values[d] - half_width;
    bounds.upper[d] = theta.values[d] + half_width;
  }
  return bounds;
}

metrics::ClassificationReport evaluate_split(const model::NetworkState& state,
                                             const AnyDataset& split) {
  const auto predicted = std::visit(
      [&](const auto& ds) { return model::predict(state, ds); }, split);
  return metrics::classify_metrics(true_labels(split), predicted,
                                   class_count(split));
}

double accuracy_on(const model::NetworkState& state, const AnyDataset& split) {
  return std::visit([&](const auto& ds) { return model::accuracy(state, ds); },
                    split);
}

double fitness_of(const std::vector<double>& candidate,
                  const model::NetworkState& state,
                  const LayerSelector& selector, const AnyDataset& val_split) {
  if (split_size(val_split) == 0) {
    throw ConfigError("fitness_of: empty validation split");
  }
  ParameterVector theta = extract_theta(state, selector);
  if (candidate.size() != theta.size()) {
    throw DimensionError("fitness_of: candidate length " +
                         std::to_string(candidate.size()) +
                         " does not match selection size " +
                         std::to_string(theta.size()));
  }
  theta.values = candidate;
  const model::NetworkState scratch = inject_theta(state, theta);
  return 1.0 - accuracy_on(scratch, val_split);
}

CostEstimate estimate_cost(const CostModel& cm) {
  if (cm.iota < 0.0 || cm.zeta < 0.0 || cm.pretrain_iterations < 0.0 ||
      cm.optimize_iterations < 0.0 || cm.agents < 0.0) {
    throw ConfigError("estimate_cost: all cost-model terms must be nonnegative");
  }
  CostEstimate estimate;
  estimate.pretrain = (cm.iota + cm.zeta) * cm.pretrain_iterations;
  estimate.finetune = cm.zeta * cm.optimize_iterations * cm.agents;
  estimate.total = estimate.pretrain + estimate.finetune;
  return estimate;
}

PipelineReport run_pipeline(const PipelineInputs& inputs,
                            const model::TrainConfig& pretrain_cfg,
                            const FinetuneConfig& finetune_cfg,
                            const model::NetworkState* pretrained) {
  return run_pipeline(inputs, pretrain_cfg, finetune_cfg, nullptr, pretrained);
}

PipelineReport run_pipeline(const PipelineInputs& inputs,
                            const model::TrainConfig& pretrain_cfg,
                            const FinetuneConfig& finetune_cfg,
                            PipelineStates* states_out,
                            const model::NetworkState* pretrained) {
  if (split_size(inputs.train) == 0 || split_size(inputs.val) == 0 ||
      split_size(inputs.test) == 0) {
    throw ConfigError("run_pipeline: dataset needs train/val/test splits");
  }
  finetune_cfg.delta.validate();

  PipelineReport report;
  report.seed = finetune_cfg.seed;
  report.anchored = finetune_cfg.anchor;

  // Phase 1: pre-training (or an existing state handed in).
  model::NetworkState pre_state;
  const auto pretrain_start = Clock::now();
  if (pretrained != nullptr) {
    pre_state = *pretrained;
  } else {
    const bool tabular = std::holds_alternative<data::TabularDataset>(inputs.train);
    if (tabular != std::holds_alternative<model::MlpSpec>(inputs.spec)) {
      throw ConfigError("run_pipeline: model kind does not match dataset kind");
    }
    if (tabular) {
      auto result = model::sgd_train(std::get<model::MlpSpec>(inputs.spec),
                                     std::get<data::TabularDataset>(inputs.train),
                                     std::get<data::TabularDataset>(inputs.val),
                                     pretrain_cfg);
      pre_state = std::move(result.state);
      report.pretrain_trace = std::move(result.trace);
    } else {
      auto result = model::sgd_train(std::get<model::LstmSpec>(inputs.spec),
                                     std::get<data::TokenDataset>(inputs.train),
                                     std::get<data::TokenDataset>(inputs.val),
                                     pretrain_cfg);
      pre_state = std::move(result.state);
      report.pretrain_trace = std::move(result.trace);
    }
    report.access.train += static_cast<std::uint64_t>(pretrain_cfg.epochs);
    report.access.val += static_cast<std::uint64_t>(pretrain_cfg.epochs);
  }
  report.pretrain_seconds = seconds_since(pretrain_start);

  // Phase 2: bounded meta-heuristic search on the selected weights.
  const auto finetune_start = Clock::now();
  const ParameterVector theta = extract_theta(pre_state, finetune_cfg.selector);
  report.theta_size = theta.size();
  const optim::Bounds bounds = build_space(theta, finetune_cfg.delta);

  std::atomic<std::uint64_t> val_reads{0};
  const optim::FitnessFn fitness = [&](const std::vector<double>& candidate) {
    val_reads.fetch_add(1, std::memory_order_relaxed);
    ParameterVector injected = theta;
    injected.values = candidate;
    const model::NetworkState scratch = inject_theta(pre_state, injected);
    return 1.0 - accuracy_on(scratch, inputs.val);
  };

  optim::OptimizeOptions options;
  options.algorithm = finetune_cfg.algorithm;
  options.ga = finetune_cfg.ga;
  options.pso = finetune_cfg.pso;
  options.budget = finetune_cfg.budget;
  options.seed = finetune_cfg.seed;
  options.threads = finetune_cfg.threads;
  if (finetune_cfg.anchor) {
    options.anchor = theta.values;
  }
  report.optimization = optimize(fitness, bounds, options);
  report.access.val += val_reads.load();

  ParameterVector best = theta;
  best.values = report.optimization.best_position;
  const model::NetworkState post_state = inject_theta(pre_state, best);
  report.finetune_seconds = seconds_since(finetune_start);

  // Final comparison: validation bookkeeping plus exactly two test reads.
  report.pre_val_accuracy = accuracy_on(pre_state, inputs.val);
  report.post_val_accuracy = accuracy_on(post_state, inputs.val);
  report.access.val += 2;
  report.pre_test = evaluate_split(pre_state, inputs.test);
  report.post_test = evaluate_split(post_state, inputs.test);
  report.access.test += 2;

  if (states_out != nullptr) {
    states_out->pre = std::move(pre_state);
    states_out->post = std::move(post_state);
  }
  return report;
}

nlohmann::json PipelineReport::to_json(bool include_timing) const {
  const auto metrics_json = [](const metrics::ClassificationReport& r) {
    return nlohmann::json{{"accuracy", r.accuracy},
                          {"precision", r.precision},
                          {"recall", r.recall},
                          {"f1", r.f1}};
  };
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& epoch : pretrain_trace) {
    trace.push_back({{"train_loss", epoch.train_loss},
                     {"val_accuracy", epoch.val_accuracy}});
  }
  nlohmann::json j{
      {"seed", seed},
      {"anchored", anchored},
      {"theta_size", theta_size},
      {"pre", {{"test", metrics_json(pre_test)}, {"val_accuracy", pre_val_accuracy}}},
      {"post",
       {{"test", metrics_json(post_test)}, {"val_accuracy", post_val_accuracy}}},
      {"optimization", optimization.to_json()},
      {"pretrain_trace", trace},
      {"split_reads",
       {{"train", access.train}, {"val", access.val}, {"test", access.test}}},
  };
  if (include_timing) {
    j["timing"] = {{"pretrain_seconds", pretrain_seconds},
                   {"finetune_seconds", finetune_seconds}};
  }
  return j;
}

}  // namespace wf::finetune
