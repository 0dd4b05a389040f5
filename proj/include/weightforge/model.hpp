#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "weightforge/data.hpp"
#include "weightforge/matrix.hpp"

namespace wf::model {

enum class Activation { relu, tanh_ };

struct MlpSpec {
  int n_i = 1;       // input units
  int n_hidden = 1;  // hidden units
  int n_o = 1;       // output units (softmax classes)
  Activation activation = Activation::relu;

  void validate() const;
};

struct LstmSpec {
  int vocab_size = 2;  // token-id cardinality, id 0 reserved as padding
  int n_e = 1;         // embedding dimension
  int n_hidden = 1;    // hidden/cell dimension
  int n_o = 1;         // output classes

  void validate() const;
};

enum class TensorKind { weight, bias };

struct Tensor {
  std::string name;   // e.g. "output.weight"
  std::string layer;  // e.g. "output"
  TensorKind kind = TensorKind::weight;
  Matrix value;
};

enum class NetworkKind { mlp, lstm };

// Named weight tensors in a fixed declared order plus the owning spec.
// The declared order is the serialization order and the flattening order
// used for fine-tuning.
struct NetworkState {
  NetworkKind kind = NetworkKind::mlp;
  MlpSpec mlp;
  LstmSpec lstm;
  std::vector<Tensor> tensors;

  Tensor& tensor(std::string_view name);
  const Tensor& tensor(std::string_view name) const;
  bool has_tensor(std::string_view name) const;
  int output_classes() const;
};

// Fresh states with weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
// (fan_in = rows of the matrix) and zero biases.
NetworkState init_mlp(const MlpSpec& spec, std::uint64_t seed);
NetworkState init_lstm(const LstmSpec& spec, std::uint64_t seed);

// Gradient tensors parallel to NetworkState::tensors plus the batch loss.
struct Gradients {
  std::vector<Matrix> tensors;
  double loss = 0.0;
};

Matrix softmax_rows(const Matrix& logits);

// batch is B x n_i; returns B x n_o logits.
Matrix mlp_forward(const NetworkState& state, const Matrix& batch);

// Mean cross-entropy over the batch and its exact gradients.
Gradients mlp_backward(const NetworkState& state, const Matrix& batch,
                       const std::vector<int>& labels);

// One cell update on already-embedded input. Gates use sigmoid, candidate
// and cell output use tanh.
void lstm_step(const NetworkState& state, const std::vector<double>& x_t,
               const std::vector<double>& h_prev,
               const std::vector<double>& c_prev, std::vector<double>& h_out,
               std::vector<double>& c_out);

// Classification logits from the final hidden state (h_0 = c_0 = 0).
// Padding tokens (id 0) are skipped; hidden and cell state carry through.
std::vector<double> lstm_forward(const NetworkState& state,
                                 const std::vector<int>& tokens);

// Full backpropagation through time for one sequence.
Gradients lstm_backward(const NetworkState& state,
                        const std::vector<int>& tokens, int label);

struct TrainConfig {
  int epochs = 1;
  int batch_size = 1;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  int max_seq_len = 0;  // LSTM only; 0 = keep full sequences

  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  NetworkState state;
  std::vector<EpochStats> trace;  // one entry per epoch
};

// Plain minibatch SGD; deterministic given cfg.seed (initialization and
// shuffling both derive from it).
TrainResult sgd_train(const MlpSpec& spec, const data::TabularDataset& train,
                      const data::TabularDataset& val, const TrainConfig& cfg);
TrainResult sgd_train(const LstmSpec& spec, const data::TokenDataset& train,
                      const data::TokenDataset& val, const TrainConfig& cfg);

// Argmax class predictions (ties resolve to the lowest index).
std::vector<int> predict(const NetworkState& state,
                         const data::TabularDataset& ds);
std::vector<int> predict(const NetworkState& state,
                         const data::TokenDataset& ds);

double accuracy(const NetworkState& state, const data::TabularDataset& ds);
double accuracy(const NetworkState& state, const data::TokenDataset& ds);

}  // namespace wf::model
