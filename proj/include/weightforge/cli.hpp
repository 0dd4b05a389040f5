#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "weightforge/finetune.hpp"

namespace wf::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct DatasetConfig {
  enum class Kind { blobs, toy_sentiment, csv, cifar, token_corpus };
  Kind kind = Kind::blobs;

  // generators
  int classes = 3;
  int per_class = 60;
  int dims = 2;
  double spread = 0.6;
  int vocab_size = 40;
  int samples = 240;
  int max_len = 12;
  std::uint64_t seed = 7;  // the dataset itself is fixed across run seeds

  // file-backed datasets
  std::string path;
  std::string label_column = "label";
};

struct ModelConfig {
  enum class Kind { mlp, lstm };
  Kind kind = Kind::mlp;
  int hidden = 16;
  model::Activation activation = model::Activation::relu;
  int embedding = 16;  // LSTM only
};

// One experiment: dataset, model, pre-training, fine-tuning, seeds.
// Per-run sub-seeds (split / training / optimizer) derive from each run
// seed, so a seed fully determines its artifacts.
struct ExperimentConfig {
  DatasetConfig dataset;
  data::SplitSpec split;  // fractions + stratified flag; seed set per run
  ModelConfig model;
  model::TrainConfig train;
  finetune::FinetuneConfig finetune;
  std::string budget_preset;  // "alpha" | "beta" | "gamma" | "" (explicit)
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string output_dir = "runs/out";
};

optim::RunBudget budget_preset(const std::string& name);

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

// Dataset materialization plus the seeded split for one run.
finetune::PipelineInputs materialize_inputs(const ExperimentConfig& config,
                                            std::uint64_t run_seed);

finetune::ModelSpec resolve_model_spec(const ExperimentConfig& config,
                                       const finetune::AnyDataset& sample);

// Subcommand bodies. Each returns a process exit code, writes its artifacts
// under config.output_dir, and finishes with a manifest naming them.
int cmd_pretrain(const ExperimentConfig& config);
int cmd_finetune(const ExperimentConfig& config,
                 const std::optional<std::string>& weights_dir);
int cmd_evaluate(const ExperimentConfig& config, const std::string& weights_path,
                 const std::string& split_name, std::uint64_t run_seed);
int cmd_compare(const std::string& csv_a, const std::string& csv_b, double alpha,
                const std::string& out_dir, const std::string& name_a = "a",
                const std::string& name_b = "b");
int cmd_sweep(const ExperimentConfig& config, const std::vector<double>& deltas,
              const std::vector<std::string>& presets);

// Full argv entry point (used by main and by tests).
int run(int argc, const char* const* argv);

// Per-run metric CSV helpers (header: seed,accuracy,precision,recall,f1).
struct MetricRows {
  std::vector<std::uint64_t> seeds;
  std::vector<metrics::ClassificationReport> rows;
};
void write_metric_csv(const MetricRows& rows, const std::string& path);
MetricRows read_metric_csv(const std::string& path);

}  // namespace wf::cli
