#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "weightforge/cli.hpp"
#include "weightforge/data.hpp"
#include "weightforge/finetune.hpp"
#include "weightforge/metrics.hpp"
#include "weightforge/model.hpp"
#include "weightforge/optim.hpp"
#include "weightforge/rng.hpp"
#include "weightforge/serialize.hpp"

namespace py = pybind11;
using namespace wf;

namespace {

py::object json_to_py(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null:
      return py::none();
    case nlohmann::json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer:
      return py::int_(j.get<long long>());
    case nlohmann::json::value_t::number_unsigned:
      return py::int_(j.get<unsigned long long>());
    case nlohmann::json::value_t::number_float:
      return py::float_(j.get<double>());
    case nlohmann::json::value_t::string:
      return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& item : j) {
        out.append(json_to_py(item));
      }
      return out;
    }
    case nlohmann::json::value_t::object: {
      py::dict out;
      for (const auto& [key, value] : j.items()) {
        out[py::str(key)] = json_to_py(value);
      }
      return out;
    }
    default:
      return py::none();
  }
}

py::array_t<double> matrix_to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

Matrix numpy_to_matrix(const py::array_t<double, py::array::c_style |
                                                      py::array::forcecast>& arr) {
  if (arr.ndim() != 2) {
    throw DimensionError("expected a 2-d array");
  }
  Matrix m(static_cast<std::size_t>(arr.shape(0)),
           static_cast<std::size_t>(arr.shape(1)));
  std::copy(arr.data(), arr.data() + arr.size(), m.data.begin());
  return m;
}

optim::Algorithm parse_algorithm(const std::string& name) {
  if (name == "ga") {
    return optim::Algorithm::ga;
  }
  if (name == "pso") {
    return optim::Algorithm::pso;
  }
  throw ConfigError("algorithm must be 'ga' or 'pso'");
}

py::dict metrics_dict(const metrics::ClassificationReport& r) {
  py::dict out;
  out["accuracy"] = r.accuracy;
  out["precision"] = r.precision;
  out["recall"] = r.recall;
  out["f1"] = r.f1;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gradient pre-training plus GA/PSO weight fine-tuning";

  py::register_exception<Error>(m, "WeightforgeError", PyExc_RuntimeError);

  // ---- datasets -----------------------------------------------------------
  py::class_<data::TabularDataset>(m, "TabularDataset")
      .def_property_readonly(
          "features",
          [](const data::TabularDataset& ds) { return matrix_to_numpy(ds.features); })
      .def_property_readonly(
          "labels",
          [](const data::TabularDataset& ds) { return ds.labels; })
      .def_readonly("class_count", &data::TabularDataset::class_count)
      .def("__len__", [](const data::TabularDataset& ds) { return ds.size(); });

  py::class_<data::TokenDataset>(m, "TokenDataset")
      .def_property_readonly(
          "sequences",
          [](const data::TokenDataset& ds) { return ds.sequences; })
      .def_property_readonly(
          "labels", [](const data::TokenDataset& ds) { return ds.labels; })
      .def_readonly("vocab_size", &data::TokenDataset::vocab_size)
      .def_readonly("class_count", &data::TokenDataset::class_count)
      .def("__len__", [](const data::TokenDataset& ds) { return ds.size(); });

  m.def("make_blobs", &data::make_blobs, py::arg("classes"),
        py::arg("per_class"), py::arg("dims"), py::arg("spread"),
        py::arg("seed"));
  m.def("make_toy_sentiment", &data::make_toy_sentiment, py::arg("vocab_size"),
        py::arg("samples"), py::arg("max_len"), py::arg("seed"));
  m.def("load_csv", &data::load_csv, py::arg("path"), py::arg("label_column"));
  m.def("load_cifar_batch", &data::load_cifar_batch, py::arg("path"));
  m.def("load_token_corpus", &data::load_token_corpus, py::arg("path"));

  m.def(
      "split",
      [](const data::TabularDataset& ds, double train, double val, double test,
         std::uint64_t seed, bool stratified) {
        data::SplitSpec spec{train, val, test, seed, stratified};
        auto splits = data::split(ds, spec);
        return py::make_tuple(splits.train, splits.val, splits.test);
      },
      py::arg("dataset"), py::arg("train") = 0.8, py::arg("val") = 0.1,
      py::arg("test") = 0.1, py::arg("seed") = 0, py::arg("stratified") = false);
  m.def(
      "split_tokens",
      [](const data::TokenDataset& ds, double train, double val, double test,
         std::uint64_t seed, bool stratified) {
        data::SplitSpec spec{train, val, test, seed, stratified};
        auto splits = data::split(ds, spec);
        return py::make_tuple(splits.train, splits.val, splits.test);
      },
      py::arg("dataset"), py::arg("train") = 0.8, py::arg("val") = 0.1,
      py::arg("test") = 0.1, py::arg("seed") = 0, py::arg("stratified") = false);

  // ---- networks -----------------------------------------------------------
  py::class_<model::NetworkState>(m, "Network")
      .def_property_readonly(
          "kind",
          [](const model::NetworkState& s) {
            return s.kind == model::NetworkKind::mlp ? "mlp" : "lstm";
          })
      .def_property_readonly(
          "tensor_names",
          [](const model::NetworkState& s) {
            std::vector<std::string> names;
            for (const auto& tensor : s.tensors) {
              names.push_back(tensor.name);
            }
            return names;
          })
      .def("tensor",
           [](const model::NetworkState& s, const std::string& name) {
             return matrix_to_numpy(s.tensor(name).value);
           })
      .def("save",
           [](const model::NetworkState& s, const std::string& path) {
             model::save_network(s, path);
           })
      .def("to_json", [](const model::NetworkState& s) {
        return json_to_py(model::network_to_json(s));
      });

  m.def("load_network", &model::load_network, py::arg("path"));

  m.def(
      "sgd_train_mlp",
      [](const data::TabularDataset& train, const data::TabularDataset& val,
         int hidden, const std::string& activation, int epochs, int batch_size,
         double learning_rate, std::uint64_t seed) {
        model::MlpSpec spec;
        spec.n_i = static_cast<int>(train.dims());
        spec.n_hidden = hidden;
        spec.n_o = train.class_count;
        if (activation == "relu") {
          spec.activation = model::Activation::relu;
        } else if (activation == "tanh") {
          spec.activation = model::Activation::tanh_;
        } else {
          throw ConfigError("activation must be 'relu' or 'tanh'");
        }
        model::TrainConfig cfg{epochs, batch_size, learning_rate, seed};
        auto result = model::sgd_train(spec, train, val, cfg);
        py::list trace;
        for (const auto& epoch : result.trace) {
          py::dict row;
          row["train_loss"] = epoch.train_loss;
          row["val_accuracy"] = epoch.val_accuracy;
          trace.append(row);
        }
        return py::make_tuple(result.state, trace);
      },
      py::arg("train"), py::arg("val"), py::arg("hidden") = 16,
      py::arg("activation") = "relu", py::arg("epochs") = 10,
      py::arg("batch_size") = 16, py::arg("learning_rate") = 0.1,
      py::arg("seed") = 0);

  m.def(
      "sgd_train_lstm",
      [](const data::TokenDataset& train, const data::TokenDataset& val,
         int embedding, int hidden, int epochs, int batch_size,
         double learning_rate, std::uint64_t seed, int max_seq_len) {
        model::LstmSpec spec;
        spec.vocab_size = train.vocab_size;
        spec.n_e = embedding;
        spec.n_hidden = hidden;
        spec.n_o = train.class_count;
        model::TrainConfig cfg{epochs, batch_size, learning_rate, seed,
                               max_seq_len};
        auto result = model::sgd_train(spec, train, val, cfg);
        py::list trace;
        for (const auto& epoch : result.trace) {
          py::dict row;
          row["train_loss"] = epoch.train_loss;
          row["val_accuracy"] = epoch.val_accuracy;
          trace.append(row);
        }
        return py::make_tuple(result.state, trace);
      },
      py::arg("train"), py::arg("val"), py::arg("embedding") = 16,
      py::arg("hidden") = 16, py::arg("epochs") = 10, py::arg("batch_size") = 8,
      py::arg("learning_rate") = 0.1, py::arg("seed") = 0,
      py::arg("max_seq_len") = 0);

  m.def(
      "mlp_forward",
      [](const model::NetworkState& state,
         const py::array_t<double, py::array::c_style | py::array::forcecast>&
             batch) { return matrix_to_numpy(model::mlp_forward(state, numpy_to_matrix(batch))); },
      py::arg("network"), py::arg("batch"));
  m.def("lstm_forward", &model::lstm_forward, py::arg("network"),
        py::arg("tokens"));

  m.def(
      "evaluate",
      [](const model::NetworkState& state, const data::TabularDataset& ds) {
        return metrics_dict(finetune::evaluate_split(state, ds));
      },
      py::arg("network"), py::arg("dataset"));
  m.def(
      "evaluate_tokens",
      [](const model::NetworkState& state, const data::TokenDataset& ds) {
        return metrics_dict(finetune::evaluate_split(state, ds));
      },
      py::arg("network"), py::arg("dataset"));

  // ---- fine-tuning --------------------------------------------------------
  m.def(
      "extract_theta",
      [](const model::NetworkState& state, const std::vector<std::string>& layers,
         bool include_biases) {
        finetune::LayerSelector selector{layers, include_biases};
        const auto theta = finetune::extract_theta(state, selector);
        py::array_t<double> out(theta.values.size());
        std::copy(theta.values.begin(), theta.values.end(), out.mutable_data());
        return out;
      },
      py::arg("network"), py::arg("layers") = std::vector<std::string>{"output"},
      py::arg("include_biases") = false);

  m.def(
      "estimate_cost",
      [](double iota, double zeta, double pretrain_iterations,
         double optimize_iterations, double agents) {
        finetune::CostModel cm{iota, zeta, pretrain_iterations,
                               optimize_iterations, agents};
        const auto estimate = finetune::estimate_cost(cm);
        py::dict out;
        out["pretrain"] = estimate.pretrain;
        out["finetune"] = estimate.finetune;
        out["total"] = estimate.total;
        return out;
      },
      py::arg("iota"), py::arg("zeta"), py::arg("pretrain_iterations"),
      py::arg("optimize_iterations"), py::arg("agents"));

  m.def(
      "optimize",
      [](const std::function<double(std::vector<double>)>& fitness,
         const std::vector<double>& lower, const std::vector<double>& upper,
         const std::string& algorithm, std::size_t agents,
         std::size_t iterations, std::uint64_t seed,
         const std::optional<std::vector<double>>& anchor, double p_s,
         double p_c, double p_m, double w, double c1, double c2) {
        optim::Bounds bounds{lower, upper};
        optim::OptimizeOptions options;
        options.algorithm = parse_algorithm(algorithm);
        options.budget = {agents, iterations};
        options.seed = seed;
        options.anchor = anchor;
        options.ga.p_s = p_s;
        options.ga.p_c = p_c;
        options.ga.p_m = p_m;
        options.pso.w = w;
        options.pso.c1 = c1;
        options.pso.c2 = c2;
        // Python callbacks hold the GIL, so evaluations stay sequential.
        options.threads = 1;
        const auto result = optim::optimize(
            [&](const std::vector<double>& x) { return fitness(x); }, bounds,
            options);
        return json_to_py(result.to_json());
      },
      py::arg("fitness"), py::arg("lower"), py::arg("upper"),
      py::arg("algorithm") = "pso", py::arg("agents") = 10,
      py::arg("iterations") = 5, py::arg("seed") = 0,
      py::arg("anchor") = std::nullopt, py::arg("p_s") = 0.75,
      py::arg("p_c") = 0.5, py::arg("p_m") = 0.25, py::arg("w") = 0.7,
      py::arg("c1") = 1.7, py::arg("c2") = 1.7);

  m.def(
      "run_experiment",
      [](const py::dict& config, std::uint64_t seed) {
        const auto j = nlohmann::json::parse(
            py::module_::import("json").attr("dumps")(config).cast<std::string>());
        const auto experiment = cli::parse_experiment_config(j);
        auto inputs = cli::materialize_inputs(experiment, seed);
        model::TrainConfig train_cfg = experiment.train;
        train_cfg.seed = derive_seed(seed, 2);
        finetune::FinetuneConfig ft = experiment.finetune;
        ft.seed = derive_seed(seed, 3);
        const auto report = finetune::run_pipeline(inputs, train_cfg, ft);
        return json_to_py(report.to_json(true));
      },
      py::arg("config"), py::arg("seed"));

  // ---- statistics ---------------------------------------------------------
  m.def(
      "classify_metrics",
      [](const std::vector<int>& y_true, const std::vector<int>& y_pred,
         int classes, const std::string& averaging) {
        const auto avg = averaging == "weighted" ? metrics::Averaging::weighted
                                                 : metrics::Averaging::macro;
        return metrics_dict(metrics::classify_metrics(y_true, y_pred, classes, avg));
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("classes"),
      py::arg("averaging") = "macro");

  m.def(
      "wilcoxon_signed_rank",
      [](const std::vector<double>& a, const std::vector<double>& b,
         double alpha) {
        const auto outcome = metrics::wilcoxon_signed_rank(a, b, alpha);
        py::dict out;
        out["statistic"] = outcome.statistic;
        out["n_effective"] = outcome.n_effective;
        out["p_value"] = outcome.p_value;
        out["significant"] = outcome.significant;
        out["degenerate"] = outcome.degenerate;
        out["alpha"] = outcome.alpha;
        return out;
      },
      py::arg("a"), py::arg("b"), py::arg("alpha") = 0.05);

  m.def(
      "aggregate_runs",
      [](const std::vector<double>& values) {
        const auto agg = metrics::aggregate_runs(values);
        py::dict out;
        out["mean"] = agg.mean;
        out["stddev"] = agg.stddev;
        out["runs"] = agg.runs;
        out["degenerate"] = agg.degenerate;
        return out;
      },
      py::arg("values"));

  m.attr("__version__") = cli::kToolVersion;
}
