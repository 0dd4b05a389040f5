#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "weightforge/data.hpp"
#include "weightforge/metrics.hpp"
#include "weightforge/model.hpp"
#include "weightforge/optim.hpp"

namespace wf::finetune {

// Flat view over a subset of network tensors plus the layout needed to map
// flat indices back onto (tensor, row, col).
struct LayoutEntry {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
};

struct ParameterVector {
  std::vector<double> values;
  std::vector<LayoutEntry> layout;

  std::size_t size() const { return values.size(); }
};

// Which layers feed the search space. Defaults to the last fully-connected
// layer's weights; biases join only on request.
struct LayerSelector {
  std::vector<std::string> layers = {"output"};
  bool include_biases = false;
};

// Half-width of the search box around theta: one shared value or one per
// dimension.
struct DeltaSpec {
  std::vector<double> values;  // size 1 = scalar delta

  static DeltaSpec scalar(double delta) { return DeltaSpec{{delta}}; }
  bool is_scalar() const { return values.size() == 1; }
  void validate() const;
};

// Epoch-cost bookkeeping for the two pipeline phases.
struct CostModel {
  double iota = 0.0;  // training cost per epoch
  double zeta = 0.0;  // validation cost per epoch
  double pretrain_iterations = 0.0;  // T_n
  double optimize_iterations = 0.0;  // T_o
  double agents = 0.0;               // m
};

struct CostEstimate {
  double pretrain = 0.0;  // (iota + zeta) * T_n
  double finetune = 0.0;  // zeta * T_o * m
  double total = 0.0;
};

// Flattens the selected tensors in declared order, row-major inside each.
ParameterVector extract_theta(const model::NetworkState& state,
                              const LayerSelector& selector);

// Copy of `state` with the vector written back through its layout.
model::NetworkState inject_theta(const model::NetworkState& state,
                                 const ParameterVector& theta);

// [theta - delta, theta + delta] per dimension.
optim::Bounds build_space(const ParameterVector& theta, const DeltaSpec& delta);

using AnyDataset = std::variant<data::TabularDataset, data::TokenDataset>;

// 1 - validation accuracy of the candidate injected into a scratch copy of
// the base state (minimization convention; the base state is untouched).
double fitness_of(const std::vector<double>& candidate,
                  const model::NetworkState& state,
                  const LayerSelector& selector, const AnyDataset& val_split);

metrics::ClassificationReport evaluate_split(const model::NetworkState& state,
                                             const AnyDataset& split);
double accuracy_on(const model::NetworkState& state, const AnyDataset& split);

CostEstimate estimate_cost(const CostModel& cm);

struct FinetuneConfig {
  optim::Algorithm algorithm = optim::Algorithm::ga;
  optim::GaConfig ga;
  optim::PsoConfig pso;
  optim::RunBudget budget;
  DeltaSpec delta = DeltaSpec::scalar(0.001);
  LayerSelector selector;
  bool anchor = true;  // seed agent 0 exactly at theta
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

// Evaluation reads per split; the test split must be touched exactly twice
// (once per final comparison).
struct SplitAccess {
  std::uint64_t train = 0;
  std::uint64_t val = 0;
  std::uint64_t test = 0;
};

struct PipelineReport {
  metrics::ClassificationReport pre_test;
  metrics::ClassificationReport post_test;
  double pre_val_accuracy = 0.0;
  double post_val_accuracy = 0.0;
  optim::OptimizationResult optimization;
  std::vector<model::EpochStats> pretrain_trace;
  SplitAccess access;
  double pretrain_seconds = 0.0;
  double finetune_seconds = 0.0;
  std::uint64_t seed = 0;
  std::size_t theta_size = 0;
  bool anchored = true;

  // Timing stays out of the default serialization so repeated runs emit
  // byte-identical files; manifests carry the wall times.
  nlohmann::json to_json(bool include_timing = false) const;
};

using ModelSpec = std::variant<model::MlpSpec, model::LstmSpec>;

struct PipelineInputs {
  ModelSpec spec;
  AnyDataset train;
  AnyDataset val;
  AnyDataset test;
};

// Pre-train (or adopt `pretrained` if given), search the bounded space
// around the selected weights against validation accuracy, write back the
// best candidate, then evaluate pre vs post on the untouched test split.
PipelineReport run_pipeline(const PipelineInputs& inputs,
                            const model::TrainConfig& pretrain_cfg,
                            const FinetuneConfig& finetune_cfg,
                            const model::NetworkState* pretrained = nullptr);

// The networks the last run_pipeline call compared, for callers that need
// to persist them.
struct PipelineStates {
  model::NetworkState pre;
  model::NetworkState post;
};

PipelineReport run_pipeline(const PipelineInputs& inputs,
                            const model::TrainConfig& pretrain_cfg,
                            const FinetuneConfig& finetune_cfg,
                            PipelineStates* states_out,
                            const model::NetworkState* pretrained = nullptr);

}  // namespace wf::finetune
