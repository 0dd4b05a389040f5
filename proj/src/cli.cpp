#include "weightforge/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "weightforge/errors.hpp"
#include "weightforge/rng.hpp"
#include "weightforge/serialize.hpp"

namespace wf::cli {

namespace fs = std::filesystem;

namespace {

// Sub-seed tags hanging off each run seed.
constexpr std::uint64_t kSplitTag = 1;
constexpr std::uint64_t kTrainTag = 2;
constexpr std::uint64_t kOptimTag = 3;

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buffer;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FileError("cannot write " + path);
  }
  out << text;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::string mean_std_cell(const metrics::Aggregate& agg) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.2f ± %.2f", agg.mean * 100.0,
                agg.stddev * 100.0);
  return buffer;
}

const char* kMetricNames[4] = {"accuracy", "precision", "recall", "f1"};

std::vector<double> metric_column(const MetricRows& rows, int metric) {
  std::vector<double> column;
  column.reserve(rows.rows.size());
  for (const auto& r : rows.rows) {
    switch (metric) {
      case 0: column.push_back(r.accuracy); break;
      case 1: column.push_back(r.precision); break;
      case 2: column.push_back(r.recall); break;
      default: column.push_back(r.f1); break;
    }
  }
  return column;
}

nlohmann::json aggregate_json(const MetricRows& rows) {
  nlohmann::json j;
  for (int m = 0; m < 4; ++m) {
    const auto agg = metrics::aggregate_runs(metric_column(rows, m));
    j[kMetricNames[m]] = {{"mean", agg.mean},
                          {"stddev", agg.stddev},
                          {"runs", agg.runs}};
  }
  return j;
}

model::TrainConfig train_config_for_seed(const ExperimentConfig& config,
                                         std::uint64_t run_seed) {
  model::TrainConfig cfg = config.train;
  cfg.seed = derive_seed(run_seed, kTrainTag);
  return cfg;
}

finetune::FinetuneConfig finetune_config_for_seed(const ExperimentConfig& config,
                                                  std::uint64_t run_seed) {
  finetune::FinetuneConfig cfg = config.finetune;
  cfg.seed = derive_seed(run_seed, kOptimTag);
  return cfg;
}

std::string seed_file(const std::string& dir, const std::string& stem,
                      std::uint64_t seed, const std::string& extension) {
  return dir + "/" + stem + "_seed" + std::to_string(seed) + extension;
}

// Comparison table in the results-table layout: one row per model, one
// column per metric, then p-value and significance rows.
std::string comparison_markdown(const std::string& name_a,
                                const std::string& name_b, const MetricRows& a,
                                const MetricRows& b,
                                const std::vector<metrics::WilcoxonOutcome>& tests,
                                double alpha) {
  std::ostringstream md;
  md << "| Model | Accuracy | Precision | Recall | F1-Score |\n";
  md << "|---|---|---|---|---|\n";
  const auto row = [&](const std::string& name, const MetricRows& rows) {
    md << "| " << name;
    for (int m = 0; m < 4; ++m) {
      md << " | " << mean_std_cell(metrics::aggregate_runs(metric_column(rows, m)));
    }
    md << " |\n";
  };
  row(name_a, a);
  row(name_b, b);
  md << "| p-value";
  for (const auto& test : tests) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.5f", test.p_value);
    md << " | " << buffer;
  }
  md << " |\n";
  md << "| significant (α=" << alpha << ")";
  for (const auto& test : tests) {
    md << " | " << (test.significant ? "yes" : "no");
  }
  md << " |\n";
  return md.str();
}

std::string comparison_csv(const std::string& name_a, const std::string& name_b,
                           const MetricRows& a, const MetricRows& b,
                           const std::vector<metrics::WilcoxonOutcome>& tests) {
  std::ostringstream csv;
  csv << "model,accuracy_mean,accuracy_std,precision_mean,precision_std,"
         "recall_mean,recall_std,f1_mean,f1_std\n";
  const auto row = [&](const std::string& name, const MetricRows& rows) {
    csv << name;
    char buffer[64];
    for (int m = 0; m < 4; ++m) {
      const auto agg = metrics::aggregate_runs(metric_column(rows, m));
      std::snprintf(buffer, sizeof(buffer), ",%.17g,%.17g", agg.mean, agg.stddev);
      csv << buffer;
    }
    csv << "\n";
  };
  row(name_a, a);
  row(name_b, b);
  csv << "wilcoxon_p";
  for (const auto& test : tests) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), ",%.17g,", test.p_value);
    csv << buffer << (test.significant ? "significant" : "not_significant");
  }
  csv << "\n";
  return csv.str();
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
};

int report_failures(const std::vector<SeedOutcome>& outcomes) {
  int failures = 0;
  for (const auto& outcome : outcomes) {
    if (!outcome.ok) {
      ++failures;
      std::cerr << "seed " << outcome.seed << " failed: " << outcome.error
                << "\n";
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

optim::RunBudget budget_preset(const std::string& name) {
  if (name == "alpha") {
    return {10, 5};
  }
  if (name == "beta") {
    return {50, 25};
  }
  if (name == "gamma") {
    return {100, 50};
  }
  throw ConfigError("unknown budget preset '" + name +
                    "' (expected alpha, beta, or gamma)");
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig config;

  const auto& dataset = j.at("dataset");
  const std::string dataset_type = dataset.at("type").get<std::string>();
  if (dataset_type == "blobs") {
    config.dataset.kind = DatasetConfig::Kind::blobs;
    config.dataset.classes = dataset.value("classes", config.dataset.classes);
    config.dataset.per_class = dataset.value("per_class", config.dataset.per_class);
    config.dataset.dims = dataset.value("dims", config.dataset.dims);
    config.dataset.spread = dataset.value("spread", config.dataset.spread);
    config.dataset.seed = dataset.value("seed", config.dataset.seed);
  } else if (dataset_type == "toy_sentiment") {
    config.dataset.kind = DatasetConfig::Kind::toy_sentiment;
    config.dataset.vocab_size = dataset.value("vocab_size", config.dataset.vocab_size);
    config.dataset.samples = dataset.value("samples", config.dataset.samples);
    config.dataset.max_len = dataset.value("max_len", config.dataset.max_len);
    config.dataset.seed = dataset.value("seed", config.dataset.seed);
  } else if (dataset_type == "csv") {
    config.dataset.kind = DatasetConfig::Kind::csv;
    config.dataset.path = dataset.at("path").get<std::string>();
    config.dataset.label_column =
        dataset.value("label_column", config.dataset.label_column);
  } else if (dataset_type == "cifar") {
    config.dataset.kind = DatasetConfig::Kind::cifar;
    config.dataset.path = dataset.at("path").get<std::string>();
  } else if (dataset_type == "token_corpus") {
    config.dataset.kind = DatasetConfig::Kind::token_corpus;
    config.dataset.path = dataset.at("path").get<std::string>();
  } else {
    throw ConfigError("dataset.type '" + dataset_type + "' is not supported");
  }

  if (j.contains("split")) {
    const auto& split = j.at("split");
    config.split.train_fraction = split.value("train", 0.8);
    config.split.val_fraction = split.value("val", 0.1);
    config.split.test_fraction = split.value("test", 0.1);
    config.split.stratified = split.value("stratified", false);
  }

  const auto& model_cfg = j.at("model");
  const std::string model_type = model_cfg.at("type").get<std::string>();
  if (model_type == "mlp") {
    config.model.kind = ModelConfig::Kind::mlp;
  } else if (model_type == "lstm") {
    config.model.kind = ModelConfig::Kind::lstm;
  } else {
    throw ConfigError("model.type '" + model_type + "' is not supported");
  }
  config.model.hidden = model_cfg.value("hidden", config.model.hidden);
  config.model.embedding = model_cfg.value("embedding", config.model.embedding);
  const std::string activation = model_cfg.value("activation", std::string("relu"));
  if (activation == "relu") {
    config.model.activation = model::Activation::relu;
  } else if (activation == "tanh") {
    config.model.activation = model::Activation::tanh_;
  } else {
    throw ConfigError("model.activation '" + activation + "' is not supported");
  }
  if (config.model.hidden < 1 || config.model.embedding < 1) {
    throw ConfigError("model: hidden and embedding units must be >= 1");
  }

  const auto& train = j.at("train");
  config.train.epochs = train.at("epochs").get<int>();
  config.train.batch_size = train.value("batch_size", 16);
  config.train.learning_rate = train.at("learning_rate").get<double>();
  config.train.max_seq_len = train.value("max_seq_len", 0);
  if (config.train.epochs < 1) {
    throw ConfigError("train.epochs must be >= 1");
  }
  if (!(config.train.learning_rate > 0.0)) {
    throw ConfigError("train.learning_rate must be > 0");
  }
  config.train.validate();

  const auto& ft = j.at("finetune");
  const std::string algorithm = ft.value("algorithm", std::string("ga"));
  if (algorithm == "ga") {
    config.finetune.algorithm = optim::Algorithm::ga;
  } else if (algorithm == "pso") {
    config.finetune.algorithm = optim::Algorithm::pso;
  } else {
    throw ConfigError("finetune.algorithm '" + algorithm +
                      "' is not supported (ga or pso)");
  }
  if (ft.contains("preset")) {
    config.budget_preset = ft.at("preset").get<std::string>();
    config.finetune.budget = budget_preset(config.budget_preset);
  }
  if (ft.contains("budget")) {
    if (!config.budget_preset.empty()) {
      throw ConfigError("finetune: give either preset or budget, not both");
    }
    config.finetune.budget.agents = ft.at("budget").at("agents").get<std::size_t>();
    config.finetune.budget.iterations =
        ft.at("budget").at("iterations").get<std::size_t>();
  }
  config.finetune.budget.validate();

  if (ft.contains("delta")) {
    const auto& delta = ft.at("delta");
    if (delta.is_array()) {
      config.finetune.delta.values = delta.get<std::vector<double>>();
    } else {
      config.finetune.delta = finetune::DeltaSpec::scalar(delta.get<double>());
    }
  }
  config.finetune.delta.validate();

  if (ft.contains("selector")) {
    const auto& selector = ft.at("selector");
    if (selector.contains("layers")) {
      config.finetune.selector.layers =
          selector.at("layers").get<std::vector<std::string>>();
    }
    config.finetune.selector.include_biases =
        selector.value("include_biases", false);
  }
  config.finetune.anchor = ft.value("anchor", true);

  if (ft.contains("ga")) {
    const auto& ga = ft.at("ga");
    config.finetune.ga.p_s = ga.value("p_s", config.finetune.ga.p_s);
    config.finetune.ga.p_c = ga.value("p_c", config.finetune.ga.p_c);
    config.finetune.ga.p_m = ga.value("p_m", config.finetune.ga.p_m);
    if (ga.contains("mutation_sigma") && !ga.at("mutation_sigma").is_null()) {
      config.finetune.ga.mutation_sigma = ga.at("mutation_sigma").get<double>();
    }
    config.finetune.ga.validate();
  }
  if (ft.contains("pso")) {
    const auto& pso = ft.at("pso");
    config.finetune.pso.w = pso.value("w", config.finetune.pso.w);
    config.finetune.pso.c1 = pso.value("c1", config.finetune.pso.c1);
    config.finetune.pso.c2 = pso.value("c2", config.finetune.pso.c2);
    config.finetune.pso.per_dimension_r = pso.value("per_dimension_r", false);
    config.finetune.pso.validate();
  }

  if (j.contains("seeds")) {
    config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (config.seeds.empty()) {
      throw ConfigError("seeds: need at least one seed");
    }
  }
  config.output_dir = j.value("output_dir", config.output_dir);
  return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FileError("config: cannot open " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config: invalid JSON in " + path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& config) {
  nlohmann::json dataset;
  switch (config.dataset.kind) {
    case DatasetConfig::Kind::blobs:
      dataset = {{"type", "blobs"},
                 {"classes", config.dataset.classes},
                 {"per_class", config.dataset.per_class},
                 {"dims", config.dataset.dims},
                 {"spread", config.dataset.spread},
                 {"seed", config.dataset.seed}};
      break;
    case DatasetConfig::Kind::toy_sentiment:
      dataset = {{"type", "toy_sentiment"},
                 {"vocab_size", config.dataset.vocab_size},
                 {"samples", config.dataset.samples},
                 {"max_len", config.dataset.max_len},
                 {"seed", config.dataset.seed}};
      break;
    case DatasetConfig::Kind::csv:
      dataset = {{"type", "csv"},
                 {"path", config.dataset.path},
                 {"label_column", config.dataset.label_column}};
      break;
    case DatasetConfig::Kind::cifar:
      dataset = {{"type", "cifar"}, {"path", config.dataset.path}};
      break;
    case DatasetConfig::Kind::token_corpus:
      dataset = {{"type", "token_corpus"}, {"path", config.dataset.path}};
      break;
  }

  nlohmann::json finetune_json{
      {"algorithm", config.finetune.algorithm == optim::Algorithm::ga ? "ga" : "pso"},
      {"delta", config.finetune.delta.is_scalar()
                    ? nlohmann::json(config.finetune.delta.values[0])
                    : nlohmann::json(config.finetune.delta.values)},
      {"selector",
       {{"layers", config.finetune.selector.layers},
        {"include_biases", config.finetune.selector.include_biases}}},
      {"anchor", config.finetune.anchor},
      {"ga",
       {{"p_s", config.finetune.ga.p_s},
        {"p_c", config.finetune.ga.p_c},
        {"p_m", config.finetune.ga.p_m}}},
      {"pso",
       {{"w", config.finetune.pso.w},
        {"c1", config.finetune.pso.c1},
        {"c2", config.finetune.pso.c2},
        {"per_dimension_r", config.finetune.pso.per_dimension_r}}},
  };
  if (config.budget_preset.empty()) {
    finetune_json["budget"] = {{"agents", config.finetune.budget.agents},
                               {"iterations", config.finetune.budget.iterations}};
  } else {
    finetune_json["preset"] = config.budget_preset;
  }

  return nlohmann::json{
      {"dataset", dataset},
      {"split",
       {{"train", config.split.train_fraction},
        {"val", config.split.val_fraction},
        {"test", config.split.test_fraction},
        {"stratified", config.split.stratified}}},
      {"model",
       {{"type", config.model.kind == ModelConfig::Kind::mlp ? "mlp" : "lstm"},
        {"hidden", config.model.hidden},
        {"embedding", config.model.embedding},
        {"activation",
         config.model.activation == model::Activation::relu ? "relu" : "tanh"}}},
      {"train",
       {{"epochs", config.train.epochs},
        {"batch_size", config.train.batch_size},
        {"learning_rate", config.train.learning_rate},
        {"max_seq_len", config.train.max_seq_len}}},
      {"finetune", finetune_json},
      {"seeds", config.seeds},
      {"output_dir", config.output_dir},
  };
}

finetune::PipelineInputs materialize_inputs(const ExperimentConfig& config,
                                            std::uint64_t run_seed) {
  data::SplitSpec split = config.split;
  split.seed = derive_seed(run_seed, kSplitTag);

  finetune::PipelineInputs inputs;
  switch (config.dataset.kind) {
    case DatasetConfig::Kind::blobs: {
      const auto ds = data::make_blobs(config.dataset.classes,
                                       config.dataset.per_class,
                                       config.dataset.dims, config.dataset.spread,
                                       config.dataset.seed);
      auto splits = data::split(ds, split);
      inputs.train = std::move(splits.train);
      inputs.val = std::move(splits.val);
      inputs.test = std::move(splits.test);
      break;
    }
    case DatasetConfig::Kind::csv: {
      const auto ds = data::load_csv(config.dataset.path,
                                     config.dataset.label_column);
      auto splits = data::split(ds, split);
      inputs.train = std::move(splits.train);
      inputs.val = std::move(splits.val);
      inputs.test = std::move(splits.test);
      break;
    }
    case DatasetConfig::Kind::cifar: {
      const auto ds = data::load_cifar_batch(config.dataset.path);
      auto splits = data::split(ds, split);
      inputs.train = std::move(splits.train);
      inputs.val = std::move(splits.val);
      inputs.test = std::move(splits.test);
      break;
    }
    case DatasetConfig::Kind::toy_sentiment: {
      const auto ds = data::make_toy_sentiment(
          config.dataset.vocab_size, config.dataset.samples,
          config.dataset.max_len, config.dataset.seed);
      auto splits = data::split(ds, split);
      inputs.train = std::move(splits.train);
      inputs.val = std::move(splits.val);
      inputs.test = std::move(splits.test);
      break;
    }
    case DatasetConfig::Kind::token_corpus: {
      const auto ds = data::load_token_corpus(config.dataset.path);
      auto splits = data::split(ds, split);
      inputs.train = std::move(splits.train);
      inputs.val = std::move(splits.val);
      inputs.test = std::move(splits.test);
      break;
    }
  }
  inputs.spec = resolve_model_spec(config, inputs.train);
  return inputs;
}

finetune::ModelSpec resolve_model_spec(const ExperimentConfig& config,
                                       const finetune::AnyDataset& sample) {
  if (config.model.kind == ModelConfig::Kind::mlp) {
    if (!std::holds_alternative<data::TabularDataset>(sample)) {
      throw ConfigError("model 'mlp' requires a tabular dataset");
    }
    const auto& ds = std::get<data::TabularDataset>(sample);
    model::MlpSpec spec;
    spec.n_i = static_cast<int>(ds.dims());
    spec.n_hidden = config.model.hidden;
    spec.n_o = ds.class_count;
    spec.activation = config.model.activation;
    spec.validate();
    return spec;
  }
  if (!std::holds_alternative<data::TokenDataset>(sample)) {
    throw ConfigError("model 'lstm' requires a token dataset");
  }
  const auto& ds = std::get<data::TokenDataset>(sample);
  model::LstmSpec spec;
  spec.vocab_size = ds.vocab_size;
  spec.n_e = config.model.embedding;
  spec.n_hidden = config.model.hidden;
  spec.n_o = ds.class_count;
  spec.validate();
  return spec;
}

int cmd_pretrain(const ExperimentConfig& config) {
  fs::create_directories(config.output_dir);
  std::vector<SeedOutcome> outcomes;
  nlohmann::json files = nlohmann::json::array();
  nlohmann::json timing = nlohmann::json::object();

  for (const std::uint64_t seed : config.seeds) {
    SeedOutcome outcome;
    outcome.seed = seed;
    try {
      const auto start = std::chrono::steady_clock::now();
      const auto inputs = materialize_inputs(config, seed);
      const auto train_cfg = train_config_for_seed(config, seed);

      model::TrainResult result;
      if (std::holds_alternative<model::MlpSpec>(inputs.spec)) {
        result = model::sgd_train(std::get<model::MlpSpec>(inputs.spec),
                                  std::get<data::TabularDataset>(inputs.train),
                                  std::get<data::TabularDataset>(inputs.val),
                                  train_cfg);
      } else {
        result = model::sgd_train(std::get<model::LstmSpec>(inputs.spec),
                                  std::get<data::TokenDataset>(inputs.train),
                                  std::get<data::TokenDataset>(inputs.val),
                                  train_cfg);
      }

      const std::string weights_path =
          seed_file(config.output_dir, "pretrained", seed, ".wfnn");
      save_network(result.state, weights_path);

      nlohmann::json trace = nlohmann::json::array();
      for (const auto& epoch : result.trace) {
        trace.push_back({{"train_loss", epoch.train_loss},
                         {"val_accuracy", epoch.val_accuracy}});
      }
      const std::string trace_path =
          seed_file(config.output_dir, "pretrain_trace", seed, ".json");
      write_json_file(trace_path, {{"seed", seed}, {"trace", trace}});

      files.push_back(weights_path);
      files.push_back(trace_path);
      timing[std::to_string(seed)] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
      outcome.ok = true;
    } catch (const std::exception& e) {
      outcome.error = e.what();
    }
    outcomes.push_back(outcome);
  }

  const int exit_code = report_failures(outcomes);
  if (exit_code == 0) {
    write_json_file(config.output_dir + "/manifest_pretrain.json",
                    {{"command", "pretrain"},
                     {"version", kToolVersion},
                     {"timestamp", iso_timestamp()},
                     {"config", experiment_config_to_json(config)},
                     {"files", files},
                     {"seconds_per_seed", timing}});
  }
  return exit_code;
}

int cmd_finetune(const ExperimentConfig& config,
                 const std::optional<std::string>& weights_dir) {
  fs::create_directories(config.output_dir);
  std::vector<SeedOutcome> outcomes;
  nlohmann::json files = nlohmann::json::array();
  nlohmann::json timing = nlohmann::json::object();
  MetricRows pre_rows;
  MetricRows post_rows;

  for (const std::uint64_t seed : config.seeds) {
    SeedOutcome outcome;
    outcome.seed = seed;
    try {
      const auto inputs = materialize_inputs(config, seed);
      const auto train_cfg = train_config_for_seed(config, seed);
      const auto ft_cfg = finetune_config_for_seed(config, seed);

      model::NetworkState loaded;
      const model::NetworkState* pretrained = nullptr;
      if (weights_dir) {
        const std::string path =
            seed_file(*weights_dir, "pretrained", seed, ".wfnn");
        if (!fs::exists(path)) {
          throw FileError("weights file not found: " + path);
        }
        loaded = model::load_network(path);
        pretrained = &loaded;
      }

      finetune::PipelineStates states;
      const auto report = finetune::run_pipeline(inputs, train_cfg, ft_cfg,
                                                 &states, pretrained);

      const std::string report_path =
          seed_file(config.output_dir, "report", seed, ".json");
      write_json_file(report_path, report.to_json());
      const std::string pre_path =
          seed_file(config.output_dir, "weights_pre", seed, ".wfnn");
      const std::string post_path =
          seed_file(config.output_dir, "weights_post", seed, ".wfnn");
      save_network(states.pre, pre_path);
      save_network(states.post, post_path);

      files.push_back(report_path);
      files.push_back(pre_path);
      files.push_back(post_path);
      timing[std::to_string(seed)] = {
          {"pretrain_seconds", report.pretrain_seconds},
          {"finetune_seconds", report.finetune_seconds}};
      pre_rows.seeds.push_back(seed);
      pre_rows.rows.push_back(report.pre_test);
      post_rows.seeds.push_back(seed);
      post_rows.rows.push_back(report.post_test);
      outcome.ok = true;
    } catch (const std::exception& e) {
      outcome.error = e.what();
    }
    outcomes.push_back(outcome);
  }

  const int exit_code = report_failures(outcomes);
  if (exit_code == 0) {
    const std::string pre_csv = config.output_dir + "/metrics_pre.csv";
    const std::string post_csv = config.output_dir + "/metrics_post.csv";
    write_metric_csv(pre_rows, pre_csv);
    write_metric_csv(post_rows, post_csv);
    files.push_back(pre_csv);
    files.push_back(post_csv);

    // Aggregate row plus the paper-style pre-vs-post verdicts.
    nlohmann::json wilcoxon = nlohmann::json::object();
    for (int m = 0; m < 4; ++m) {
      const auto outcome = metrics::wilcoxon_signed_rank(
          metric_column(pre_rows, m), metric_column(post_rows, m), 0.05);
      wilcoxon[kMetricNames[m]] = {{"p_value", outcome.p_value},
                                   {"statistic", outcome.statistic},
                                   {"n_effective", outcome.n_effective},
                                   {"significant", outcome.significant}};
    }
    const std::string aggregate_path = config.output_dir + "/aggregate.json";
    write_json_file(aggregate_path, {{"pre", aggregate_json(pre_rows)},
                                     {"post", aggregate_json(post_rows)},
                                     {"wilcoxon_pre_vs_post", wilcoxon}});
    files.push_back(aggregate_path);

    write_json_file(config.output_dir + "/manifest_finetune.json",
                    {{"command", "finetune"},
                     {"version", kToolVersion},
                     {"timestamp", iso_timestamp()},
                     {"config", experiment_config_to_json(config)},
                     {"files", files},
                     {"seconds_per_seed", timing}});

    std::cout << "| Model | Accuracy | Precision | Recall | F1-Score |\n";
    std::cout << "|---|---|---|---|---|\n";
    const auto print_row = [&](const std::string& name, const MetricRows& rows) {
      std::cout << "| " << name;
      for (int m = 0; m < 4; ++m) {
        std::cout << " | "
                  << mean_std_cell(metrics::aggregate_runs(metric_column(rows, m)));
      }
      std::cout << " |\n";
    };
    print_row("pre-trained", pre_rows);
    print_row("post-trained", post_rows);
  }
  return exit_code;
}

int cmd_evaluate(const ExperimentConfig& config, const std::string& weights_path,
                 const std::string& split_name, std::uint64_t run_seed) {
  if (!fs::exists(weights_path)) {
    throw FileError("weights file not found: " + weights_path);
  }
  const auto state = model::load_network(weights_path);
  const auto inputs = materialize_inputs(config, run_seed);
  const finetune::AnyDataset* split = nullptr;
  if (split_name == "train") {
    split = &inputs.train;
  } else if (split_name == "val") {
    split = &inputs.val;
  } else if (split_name == "test") {
    split = &inputs.test;
  } else {
    throw ConfigError("evaluate: unknown split '" + split_name + "'");
  }
  const auto report = finetune::evaluate_split(state, *split);
  const nlohmann::json j{{"weights", weights_path},
                         {"split", split_name},
                         {"seed", run_seed},
                         {"accuracy", report.accuracy},
                         {"precision", report.precision},
                         {"recall", report.recall},
                         {"f1", report.f1}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_compare(const std::string& csv_a, const std::string& csv_b, double alpha,
                const std::string& out_dir, const std::string& name_a,
                const std::string& name_b) {
  const MetricRows a = read_metric_csv(csv_a);
  const MetricRows b = read_metric_csv(csv_b);
  if (a.rows.size() != b.rows.size()) {
    throw PairingError("compare: run counts differ (" +
                       std::to_string(a.rows.size()) + " vs " +
                       std::to_string(b.rows.size()) + ")");
  }

  std::vector<metrics::WilcoxonOutcome> tests;
  for (int m = 0; m < 4; ++m) {
    tests.push_back(metrics::wilcoxon_signed_rank(metric_column(a, m),
                                                  metric_column(b, m), alpha));
  }

  const std::string markdown =
      comparison_markdown(name_a, name_b, a, b, tests, alpha);
  std::cout << markdown;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text_file(out_dir + "/comparison.md", markdown);
    write_text_file(out_dir + "/comparison.csv",
                    comparison_csv(name_a, name_b, a, b, tests));
  }
  return 0;
}

int cmd_sweep(const ExperimentConfig& config, const std::vector<double>& deltas,
              const std::vector<std::string>& presets) {
  if (deltas.empty()) {
    throw ConfigError("sweep: empty delta list");
  }
  if (presets.empty()) {
    throw ConfigError("sweep: empty preset list");
  }
  fs::create_directories(config.output_dir);

  struct Cell {
    double delta;
    std::string preset;
    metrics::Aggregate post_accuracy;
    double p_vs_pre;
  };
  std::vector<Cell> cells;

  for (const double delta : deltas) {
    if (!(delta > 0.0)) {
      throw ConfigError("sweep: deltas must be positive");
    }
    for (const auto& preset : presets) {
      ExperimentConfig cell_config = config;
      cell_config.finetune.delta = finetune::DeltaSpec::scalar(delta);
      cell_config.budget_preset = preset;
      cell_config.finetune.budget = budget_preset(preset);

      char delta_text[32];
      std::snprintf(delta_text, sizeof(delta_text), "%g", delta);
      cell_config.output_dir = config.output_dir + "/delta" + delta_text +
                               "_" + preset;
      const int code = cmd_finetune(cell_config, std::nullopt);
      if (code != 0) {
        return code;
      }

      const auto post =
          read_metric_csv(cell_config.output_dir + "/metrics_post.csv");
      const auto pre =
          read_metric_csv(cell_config.output_dir + "/metrics_pre.csv");
      Cell cell;
      cell.delta = delta;
      cell.preset = preset;
      cell.post_accuracy = metrics::aggregate_runs(metric_column(post, 0));
      cell.p_vs_pre =
          metrics::wilcoxon_signed_rank(metric_column(pre, 0),
                                        metric_column(post, 0), 0.05)
              .p_value;
      cells.push_back(cell);
    }
  }

  // Grid in the bound-comparison table shape: rows = presets, one column
  // per delta.
  std::ostringstream md;
  md << "| Model |";
  for (const double delta : deltas) {
    md << " Δ=" << delta << " |";
  }
  md << "\n|---|";
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    md << "---|";
  }
  md << "\n";
  for (const auto& preset : presets) {
    md << "| " << preset << " |";
    for (const double delta : deltas) {
      for (const auto& cell : cells) {
        if (cell.preset == preset && cell.delta == delta) {
          md << " " << mean_std_cell(cell.post_accuracy) << " |";
        }
      }
    }
    md << "\n";
  }

  std::ostringstream csv;
  csv << "preset,delta,post_accuracy_mean,post_accuracy_std,wilcoxon_p_vs_pre\n";
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& cell : cells) {
    char buffer[128];
    std::snprintf(buffer, sizeof(buffer), "%s,%g,%.17g,%.17g,%.17g",
                  cell.preset.c_str(), cell.delta, cell.post_accuracy.mean,
                  cell.post_accuracy.stddev, cell.p_vs_pre);
    csv << buffer << "\n";
    grid.push_back({{"preset", cell.preset},
                    {"delta", cell.delta},
                    {"post_accuracy_mean", cell.post_accuracy.mean},
                    {"post_accuracy_std", cell.post_accuracy.stddev},
                    {"wilcoxon_p_vs_pre", cell.p_vs_pre}});
  }

  std::cout << md.str();
  write_text_file(config.output_dir + "/sweep.md", md.str());
  write_text_file(config.output_dir + "/sweep.csv", csv.str());
  write_json_file(config.output_dir + "/sweep.json",
                  {{"command", "sweep"},
                   {"version", kToolVersion},
                   {"timestamp", iso_timestamp()},
                   {"config", experiment_config_to_json(config)},
                   {"grid", grid}});
  return 0;
}

void write_metric_csv(const MetricRows& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FileError("cannot write " + path);
  }
  out << "seed,accuracy,precision,recall,f1\n";
  char buffer[160];
  for (std::size_t i = 0; i < rows.rows.size(); ++i) {
    const auto& r = rows.rows[i];
    std::snprintf(buffer, sizeof(buffer), "%llu,%.17g,%.17g,%.17g,%.17g",
                  static_cast<unsigned long long>(rows.seeds[i]), r.accuracy,
                  r.precision, r.recall, r.f1);
    out << buffer << "\n";
  }
}

namespace {

void apply_overrides(ExperimentConfig& config, const std::string& out_dir,
                     const std::vector<std::uint64_t>& seeds, bool no_anchor,
                     const std::string& algorithm, const std::string& preset,
                     double delta) {
  if (!out_dir.empty()) {
    config.output_dir = out_dir;
  }
  if (!seeds.empty()) {
    config.seeds = seeds;
  }
  if (no_anchor) {
    config.finetune.anchor = false;
  }
  if (!algorithm.empty()) {
    if (algorithm == "ga") {
      config.finetune.algorithm = optim::Algorithm::ga;
    } else if (algorithm == "pso") {
      config.finetune.algorithm = optim::Algorithm::pso;
    } else {
      throw ConfigError("--algorithm must be ga or pso");
    }
  }
  if (!preset.empty()) {
    config.budget_preset = preset;
    config.finetune.budget = budget_preset(preset);
  }
  if (delta > 0.0) {
    config.finetune.delta = finetune::DeltaSpec::scalar(delta);
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"pre-train small networks, then fine-tune a selected layer's "
               "weights with GA/PSO inside bounded search spaces"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  bool no_anchor = false;
  std::string algorithm;
  std::string preset;
  double delta = 0.0;

  const auto add_experiment_flags = [&](CLI::App* cmd, bool finetune_flags) {
    cmd->add_option("--config", config_path, "experiment config JSON")
        ->required();
    cmd->add_option("--seeds", seeds, "run seeds (overrides config)");
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    if (finetune_flags) {
      cmd->add_flag("--no-anchor", no_anchor,
                    "do not seed an agent exactly at theta");
      cmd->add_option("--algorithm", algorithm, "ga or pso")
          ->check(CLI::IsMember({"ga", "pso"}));
      cmd->add_option("--preset", preset, "budget preset")
          ->check(CLI::IsMember({"alpha", "beta", "gamma"}));
      cmd->add_option("--delta", delta, "scalar search half-width");
    }
  };

  auto* pretrain = app.add_subcommand("pretrain", "gradient pre-training only");
  add_experiment_flags(pretrain, false);

  auto* finetune_cmd =
      app.add_subcommand("finetune", "full pre-train + fine-tune pipeline");
  add_experiment_flags(finetune_cmd, true);
  std::string weights_dir;
  finetune_cmd->add_option("--weights", weights_dir,
                           "directory with pretrained_seed<S>.wfnn files");

  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "evaluate a weights file on one split");
  add_experiment_flags(evaluate_cmd, false);
  std::string weights_path;
  std::string split_name = "test";
  std::uint64_t eval_seed = 0;
  bool eval_seed_set = false;
  evaluate_cmd->add_option("--weights", weights_path, "weights file (.wfnn)")
      ->required();
  evaluate_cmd->add_option("--split", split_name, "train, val, or test");
  evaluate_cmd->add_option("--seed", eval_seed, "run seed for the split")
      ->each([&](const std::string&) { eval_seed_set = true; });

  auto* compare_cmd = app.add_subcommand(
      "compare", "Wilcoxon comparison of two per-run metric CSVs");
  std::string csv_a;
  std::string csv_b;
  std::string name_a = "a";
  std::string name_b = "b";
  double alpha = 0.05;
  compare_cmd->add_option("--a", csv_a, "first metric CSV")->required();
  compare_cmd->add_option("--b", csv_b, "second metric CSV")->required();
  compare_cmd->add_option("--alpha", alpha, "significance level");
  compare_cmd->add_option("--name-a", name_a, "label for the first set");
  compare_cmd->add_option("--name-b", name_b, "label for the second set");
  compare_cmd->add_option("--out", out_dir, "where to write comparison files");

  auto* sweep_cmd =
      app.add_subcommand("sweep", "delta x budget grid of fine-tuning runs");
  add_experiment_flags(sweep_cmd, false);
  std::vector<double> sweep_deltas;
  std::vector<std::string> sweep_presets = {"alpha", "beta", "gamma"};
  sweep_cmd->add_option("--deltas", sweep_deltas, "search half-widths")
      ->required();
  sweep_cmd->add_option("--presets", sweep_presets, "budget presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (compare_cmd->parsed()) {
      return cmd_compare(csv_a, csv_b, alpha, out_dir, name_a, name_b);
    }
    ExperimentConfig config = load_experiment_config(config_path);
    apply_overrides(config, out_dir, seeds, no_anchor, algorithm, preset, delta);
    if (pretrain->parsed()) {
      return cmd_pretrain(config);
    }
    if (finetune_cmd->parsed()) {
      return cmd_finetune(config, weights_dir.empty()
                                      ? std::nullopt
                                      : std::optional<std::string>(weights_dir));
    }
    if (evaluate_cmd->parsed()) {
      const std::uint64_t run_seed = eval_seed_set ? eval_seed : config.seeds[0];
      return cmd_evaluate(config, weights_path, split_name, run_seed);
    }
    if (sweep_cmd->parsed()) {
      return cmd_sweep(config, sweep_deltas, sweep_presets);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

MetricRows read_metric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FileError("cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("metric csv: missing header in " + path);
  }
  MetricRows rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (cells.size() != 5) {
      throw ParseError("metric csv: expected 5 columns on line " +
                       std::to_string(line_no) + " of " + path);
    }
    try {
      rows.seeds.push_back(std::stoull(cells[0]));
      metrics::ClassificationReport r;
      r.accuracy = std::stod(cells[1]);
      r.precision = std::stod(cells[2]);
      r.recall = std::stod(cells[3]);
      r.f1 = std::stod(cells[4]);
      rows.rows.push_back(r);
    } catch (const std::exception&) {
      throw ParseError("metric csv: bad number on line " +
                       std::to_string(line_no) + " of " + path);
    }
    ++line_no;
  }
  if (rows.rows.empty()) {
    throw InputError("metric csv: no rows in " + path);
  }
  return rows;
}

}  // namespace wf::cli
