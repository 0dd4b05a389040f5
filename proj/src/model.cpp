#include "weightforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "weightforge/errors.hpp"
#include "weightforge/rng.hpp"

namespace wf::model {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double activate(Activation act, double x) {
  switch (act) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::tanh_:
      return std::tanh(x);
  }
  return x;
}

double activate_grad(Activation act, double pre, double post) {
  switch (act) {
    case Activation::relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh_:
      return 1.0 - post * post;
  }
  return 1.0;
}

Matrix init_weight(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  for (double& v : m.data) {
    v = rng.uniform(-bound, bound);
  }
  return m;
}

void check_finite_batch(const Matrix& batch) {
  if (!batch.all_finite()) {
    throw InputError("forward: non-finite value in input batch");
  }
}

void check_labels(const std::vector<int>& labels, int classes,
                  std::size_t batch_rows) {
  if (labels.size() != batch_rows) {
    throw DimensionError("backward: label count does not match batch rows");
  }
  if (labels.empty()) {
    throw InputError("backward: empty batch");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw InputError("backward: label out of range at index " +
                       std::to_string(i));
    }
  }
}

void check_tokens(const std::vector<int>& tokens, int vocab_size) {
  if (tokens.empty()) {
    throw InputError("lstm: empty token sequence");
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= vocab_size) {
      throw InputError("lstm: token " + std::to_string(tokens[i]) +
                       " out of range at position " + std::to_string(i));
    }
  }
}

// Per-step forward cache used by BPTT.
struct LstmStepCache {
  std::vector<double> gate_i, gate_f, gate_o, candidate;
  std::vector<double> cell, hidden, tanh_cell;
  std::vector<double> h_prev, c_prev;
  int token = 0;
};

struct LstmTensors {
  const Matrix* embedding;
  const Matrix *w_i, *u_i, *b_i;
  const Matrix *w_f, *u_f, *b_f;
  const Matrix *w_o, *u_o, *b_o;
  const Matrix *w_c, *u_c, *b_c;
  const Matrix *w_out, *b_out;
};

LstmTensors lstm_tensors(const NetworkState& state) {
  return LstmTensors{
      &state.tensor("embedding.weight").value,
      &state.tensor("lstm.w_i").value, &state.tensor("lstm.u_i").value,
      &state.tensor("lstm.b_i").value, &state.tensor("lstm.w_f").value,
      &state.tensor("lstm.u_f").value, &state.tensor("lstm.b_f").value,
      &state.tensor("lstm.w_o").value, &state.tensor("lstm.u_o").value,
      &state.tensor("lstm.b_o").value, &state.tensor("lstm.w_c").value,
      &state.tensor("lstm.u_c").value, &state.tensor("lstm.b_c").value,
      &state.tensor("output.weight").value, &state.tensor("output.bias").value,
  };
}

// pre = x_t * W + h_prev * U + b for one gate.
std::vector<double> gate_preactivation(const std::vector<double>& x,
                                       const std::vector<double>& h,
                                       const Matrix& w, const Matrix& u,
                                       const Matrix& b) {
  const std::size_t k = w.cols;
  std::vector<double> pre(k);
  for (std::size_t j = 0; j < k; ++j) {
    pre[j] = b(0, j);
  }
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) {
      continue;
    }
    for (std::size_t j = 0; j < k; ++j) {
      pre[j] += xi * w(i, j);
    }
  }
  for (std::size_t i = 0; i < u.rows; ++i) {
    const double hi = h[i];
    if (hi == 0.0) {
      continue;
    }
    for (std::size_t j = 0; j < k; ++j) {
      pre[j] += hi * u(i, j);
    }
  }
  return pre;
}

LstmStepCache lstm_step_cached(const LstmTensors& t,
                               const std::vector<double>& x,
                               const std::vector<double>& h_prev,
                               const std::vector<double>& c_prev) {
  const std::size_t k = t.u_i->rows;
  LstmStepCache cache;
  cache.h_prev = h_prev;
  cache.c_prev = c_prev;
  cache.gate_i = gate_preactivation(x, h_prev, *t.w_i, *t.u_i, *t.b_i);
  cache.gate_f = gate_preactivation(x, h_prev, *t.w_f, *t.u_f, *t.b_f);
  cache.gate_o = gate_preactivation(x, h_prev, *t.w_o, *t.u_o, *t.b_o);
  cache.candidate = gate_preactivation(x, h_prev, *t.w_c, *t.u_c, *t.b_c);
  cache.cell.resize(k);
  cache.hidden.resize(k);
  cache.tanh_cell.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    cache.gate_i[j] = sigmoid(cache.gate_i[j]);
    cache.gate_f[j] = sigmoid(cache.gate_f[j]);
    cache.gate_o[j] = sigmoid(cache.gate_o[j]);
    cache.candidate[j] = std::tanh(cache.candidate[j]);
    cache.cell[j] = cache.gate_f[j] * c_prev[j] + cache.gate_i[j] * cache.candidate[j];
    cache.tanh_cell[j] = std::tanh(cache.cell[j]);
    cache.hidden[j] = cache.gate_o[j] * cache.tanh_cell[j];
  }
  return cache;
}

std::vector<double> embedded_row(const Matrix& embedding, int token) {
  std::vector<double> x(embedding.cols);
  for (std::size_t j = 0; j < embedding.cols; ++j) {
    x[j] = embedding(static_cast<std::size_t>(token), j);
  }
  return x;
}

std::vector<double> output_logits(const std::vector<double>& hidden,
                                  const Matrix& w_out, const Matrix& b_out) {
  std::vector<double> logits(w_out.cols);
  for (std::size_t c = 0; c < w_out.cols; ++c) {
    logits[c] = b_out(0, c);
  }
  for (std::size_t j = 0; j < w_out.rows; ++j) {
    const double hj = hidden[j];
    if (hj == 0.0) {
      continue;
    }
    for (std::size_t c = 0; c < w_out.cols; ++c) {
      logits[c] += hj * w_out(j, c);
    }
  }
  return logits;
}

std::vector<double> softmax_vec(const std::vector<double>& logits) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    sum += probs[i];
  }
  for (double& p : probs) {
    p /= sum;
  }
  return probs;
}

Gradients zero_gradients(const NetworkState& state) {
  Gradients g;
  g.tensors.reserve(state.tensors.size());
  for (const auto& t : state.tensors) {
    g.tensors.emplace_back(t.value.rows, t.value.cols);
  }
  return g;
}

std::size_t tensor_index(const NetworkState& state, std::string_view name) {
  for (std::size_t i = 0; i < state.tensors.size(); ++i) {
    if (state.tensors[i].name == name) {
      return i;
    }
  }
  throw SelectorError("unknown tensor " + std::string(name));
}

void accumulate(Gradients& total, const Gradients& sample, double scale) {
  for (std::size_t i = 0; i < total.tensors.size(); ++i) {
    for (std::size_t j = 0; j < total.tensors[i].data.size(); ++j) {
      total.tensors[i].data[j] += scale * sample.tensors[i].data[j];
    }
  }
  total.loss += scale * sample.loss;
}

void apply_sgd_step(NetworkState& state, const Gradients& grads, double lr) {
  for (std::size_t i = 0; i < state.tensors.size(); ++i) {
    auto& values = state.tensors[i].value.data;
    const auto& g = grads.tensors[i].data;
    for (std::size_t j = 0; j < values.size(); ++j) {
      values[j] -= lr * g[j];
    }
  }
}

std::vector<int> truncated(const std::vector<int>& tokens, int max_len) {
  if (max_len <= 0 || tokens.size() <= static_cast<std::size_t>(max_len)) {
    return tokens;
  }
  return std::vector<int>(tokens.begin(), tokens.begin() + max_len);
}

}  // namespace

void MlpSpec::validate() const {
  if (n_i < 1 || n_hidden < 1 || n_o < 1) {
    throw ConfigError("MlpSpec: all unit counts must be >= 1");
  }
}

void LstmSpec::validate() const {
  if (vocab_size < 2 || n_e < 1 || n_hidden < 1 || n_o < 1) {
    throw ConfigError("LstmSpec: dimensions must be >= 1 (vocab >= 2)");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) {
    throw ConfigError("TrainConfig: epochs must be >= 1");
  }
  if (batch_size < 1) {
    throw ConfigError("TrainConfig: batch_size must be >= 1");
  }
  // Zero is allowed here so a zero-step run can serve as an identity check;
  // experiment configs reject it upstream.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("TrainConfig: learning_rate must be a finite value >= 0");
  }
}

Tensor& NetworkState::tensor(std::string_view name) {
  return tensors[tensor_index(*this, name)];
}

const Tensor& NetworkState::tensor(std::string_view name) const {
  return tensors[tensor_index(*this, name)];
}

bool NetworkState::has_tensor(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) {
      return true;
    }
  }
  return false;
}

int NetworkState::output_classes() const {
  return kind == NetworkKind::mlp ? mlp.n_o : lstm.n_o;
}

NetworkState init_mlp(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  NetworkState state;
  state.kind = NetworkKind::mlp;
  state.mlp = spec;
  const auto si = [](int v) { return static_cast<std::size_t>(v); };
  state.tensors = {
      {"hidden.weight", "hidden", TensorKind::weight,
       init_weight(si(spec.n_i), si(spec.n_hidden), rng)},
      {"hidden.bias", "hidden", TensorKind::bias, Matrix(1, si(spec.n_hidden))},
      {"output.weight", "output", TensorKind::weight,
       init_weight(si(spec.n_hidden), si(spec.n_o), rng)},
      {"output.bias", "output", TensorKind::bias, Matrix(1, si(spec.n_o))},
  };
  return state;
}

NetworkState init_lstm(const LstmSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  NetworkState state;
  state.kind = NetworkKind::lstm;
  state.lstm = spec;
  const auto si = [](int v) { return static_cast<std::size_t>(v); };
  const std::size_t v = si(spec.vocab_size);
  const std::size_t e = si(spec.n_e);
  const std::size_t k = si(spec.n_hidden);
  const std::size_t p = si(spec.n_o);

  state.tensors.push_back({"embedding.weight", "embedding", TensorKind::weight,
                           init_weight(v, e, rng)});
  for (const char* gate : {"i", "f", "o", "c"}) {
    const std::string g(gate);
    state.tensors.push_back({"lstm.w_" + g, "lstm", TensorKind::weight,
                             init_weight(e, k, rng)});
    state.tensors.push_back({"lstm.u_" + g, "lstm", TensorKind::weight,
                             init_weight(k, k, rng)});
    state.tensors.push_back({"lstm.b_" + g, "lstm", TensorKind::bias,
                             Matrix(1, k)});
  }
  state.tensors.push_back({"output.weight", "output", TensorKind::weight,
                           init_weight(k, p, rng)});
  state.tensors.push_back({"output.bias", "output", TensorKind::bias,
                           Matrix(1, p)});
  return state;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix probs(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double max_logit = logits(i, 0);
    for (std::size_t j = 1; j < logits.cols; ++j) {
      max_logit = std::max(max_logit, logits(i, j));
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      probs(i, j) = std::exp(logits(i, j) - max_logit);
      sum += probs(i, j);
    }
    for (std::size_t j = 0; j < logits.cols; ++j) {
      probs(i, j) /= sum;
    }
  }
  return probs;
}

Matrix mlp_forward(const NetworkState& state, const Matrix& batch) {
  if (state.kind != NetworkKind::mlp) {
    throw DimensionError("mlp_forward: state is not an MLP");
  }
  const MlpSpec& spec = state.mlp;
  if (batch.cols != static_cast<std::size_t>(spec.n_i)) {
    throw DimensionError("mlp_forward: batch has " + std::to_string(batch.cols) +
                         " columns, spec expects " + std::to_string(spec.n_i));
  }
  check_finite_batch(batch);

  Matrix hidden_pre = matmul(batch, state.tensor("hidden.weight").value);
  add_row_inplace(hidden_pre, state.tensor("hidden.bias").value);
  Matrix hidden(hidden_pre.rows, hidden_pre.cols);
  for (std::size_t i = 0; i < hidden_pre.data.size(); ++i) {
    hidden.data[i] = activate(spec.activation, hidden_pre.data[i]);
  }
  Matrix logits = matmul(hidden, state.tensor("output.weight").value);
  add_row_inplace(logits, state.tensor("output.bias").value);
  return logits;
}

Gradients mlp_backward(const NetworkState& state, const Matrix& batch,
                       const std::vector<int>& labels) {
  if (state.kind != NetworkKind::mlp) {
    throw DimensionError("mlp_backward: state is not an MLP");
  }
  const MlpSpec& spec = state.mlp;
  check_labels(labels, spec.n_o, batch.rows);
  if (batch.cols != static_cast<std::size_t>(spec.n_i)) {
    throw DimensionError("mlp_backward: batch column count mismatch");
  }
  check_finite_batch(batch);

  const Matrix& w_hidden = state.tensor("hidden.weight").value;
  const Matrix& b_hidden = state.tensor("hidden.bias").value;
  const Matrix& w_out = state.tensor("output.weight").value;
  const Matrix& b_out = state.tensor("output.bias").value;

  Matrix hidden_pre = matmul(batch, w_hidden);
  add_row_inplace(hidden_pre, b_hidden);
  Matrix hidden(hidden_pre.rows, hidden_pre.cols);
  for (std::size_t i = 0; i < hidden_pre.data.size(); ++i) {
    hidden.data[i] = activate(spec.activation, hidden_pre.data[i]);
  }
  Matrix logits = matmul(hidden, w_out);
  add_row_inplace(logits, b_out);
  Matrix probs = softmax_rows(logits);

  const double batch_size = static_cast<double>(batch.rows);
  double loss = 0.0;
  // dL/dlogits = (probs - onehot) / B, folded into probs in place.
  for (std::size_t i = 0; i < batch.rows; ++i) {
    const auto label = static_cast<std::size_t>(labels[i]);
    loss -= std::log(std::max(probs(i, label), 1e-300));
    probs(i, label) -= 1.0;
  }
  loss /= batch_size;
  for (double& v : probs.data) {
    v /= batch_size;
  }

  Gradients grads = zero_gradients(state);
  const std::size_t iw_hidden = tensor_index(state, "hidden.weight");
  const std::size_t ib_hidden = tensor_index(state, "hidden.bias");
  const std::size_t iw_out = tensor_index(state, "output.weight");
  const std::size_t ib_out = tensor_index(state, "output.bias");

  grads.tensors[iw_out] = matmul(transpose(hidden), probs);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    for (std::size_t j = 0; j < probs.cols; ++j) {
      grads.tensors[ib_out](0, j) += probs(i, j);
    }
  }

  Matrix hidden_grad = matmul(probs, transpose(w_out));
  for (std::size_t i = 0; i < hidden_grad.data.size(); ++i) {
    hidden_grad.data[i] *=
        activate_grad(spec.activation, hidden_pre.data[i], hidden.data[i]);
  }
  grads.tensors[iw_hidden] = matmul(transpose(batch), hidden_grad);
  for (std::size_t i = 0; i < hidden_grad.rows; ++i) {
    for (std::size_t j = 0; j < hidden_grad.cols; ++j) {
      grads.tensors[ib_hidden](0, j) += hidden_grad(i, j);
    }
  }
  grads.loss = loss;
  return grads;
}

void lstm_step(const NetworkState& state, const std::vector<double>& x_t,
               const std::vector<double>& h_prev,
               const std::vector<double>& c_prev, std::vector<double>& h_out,
               std::vector<double>& c_out) {
  if (state.kind != NetworkKind::lstm) {
    throw DimensionError("lstm_step: state is not an LSTM");
  }
  const LstmSpec& spec = state.lstm;
  if (x_t.size() != static_cast<std::size_t>(spec.n_e) ||
      h_prev.size() != static_cast<std::size_t>(spec.n_hidden) ||
      c_prev.size() != static_cast<std::size_t>(spec.n_hidden)) {
    throw DimensionError("lstm_step: input dimensions disagree with spec");
  }
  const LstmTensors t = lstm_tensors(state);
  LstmStepCache cache = lstm_step_cached(t, x_t, h_prev, c_prev);
  h_out = std::move(cache.hidden);
  c_out = std::move(cache.cell);
}

std::vector<double> lstm_forward(const NetworkState& state,
                                 const std::vector<int>& tokens) {
  if (state.kind != NetworkKind::lstm) {
    throw DimensionError("lstm_forward: state is not an LSTM");
  }
  const LstmSpec& spec = state.lstm;
  check_tokens(tokens, spec.vocab_size);

  const LstmTensors t = lstm_tensors(state);
  std::vector<double> hidden(static_cast<std::size_t>(spec.n_hidden), 0.0);
  std::vector<double> cell(static_cast<std::size_t>(spec.n_hidden), 0.0);
  for (int token : tokens) {
    if (token == 0) {
      continue;  // padding carries state through
    }
    const auto x = embedded_row(*t.embedding, token);
    LstmStepCache cache = lstm_step_cached(t, x, hidden, cell);
    hidden = std::move(cache.hidden);
    cell = std::move(cache.cell);
  }
  return output_logits(hidden, *t.w_out, *t.b_out);
}

Gradients lstm_backward(const NetworkState& state,
                        const std::vector<int>& tokens, int label) {
  if (state.kind != NetworkKind::lstm) {
    throw DimensionError("lstm_backward: state is not an LSTM");
  }
  const LstmSpec& spec = state.lstm;
  check_tokens(tokens, spec.vocab_size);
  if (label < 0 || label >= spec.n_o) {
    throw InputError("lstm_backward: label out of range");
  }

  const LstmTensors t = lstm_tensors(state);
  const std::size_t k = static_cast<std::size_t>(spec.n_hidden);

  // Forward with caches on the non-padding steps.
  std::vector<LstmStepCache> steps;
  steps.reserve(tokens.size());
  std::vector<double> hidden(k, 0.0);
  std::vector<double> cell(k, 0.0);
  for (int token : tokens) {
    if (token == 0) {
      continue;
    }
    const auto x = embedded_row(*t.embedding, token);
    LstmStepCache cache = lstm_step_cached(t, x, hidden, cell);
    cache.token = token;
    hidden = cache.hidden;
    cell = cache.cell;
    steps.push_back(std::move(cache));
  }

  const auto logits = output_logits(hidden, *t.w_out, *t.b_out);
  auto probs = softmax_vec(logits);
  const double loss =
      -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));
  probs[static_cast<std::size_t>(label)] -= 1.0;  // dL/dlogits

  Gradients grads = zero_gradients(state);
  const std::size_t i_emb = tensor_index(state, "embedding.weight");
  const std::size_t iw_out = tensor_index(state, "output.weight");
  const std::size_t ib_out = tensor_index(state, "output.bias");

  Matrix& g_w_out = grads.tensors[iw_out];
  Matrix& g_b_out = grads.tensors[ib_out];
  for (std::size_t c = 0; c < probs.size(); ++c) {
    g_b_out(0, c) += probs[c];
    for (std::size_t j = 0; j < k; ++j) {
      g_w_out(j, c) += hidden[j] * probs[c];
    }
  }

  std::vector<double> dh(k, 0.0);
  std::vector<double> dc(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t c = 0; c < probs.size(); ++c) {
      dh[j] += (*t.w_out)(j, c) * probs[c];
    }
  }

  struct GateRefs {
    const Matrix *w, *u;
    std::size_t iw, iu, ib;
  };
  const GateRefs gate_i{t.w_i, t.u_i, tensor_index(state, "lstm.w_i"),
                        tensor_index(state, "lstm.u_i"),
                        tensor_index(state, "lstm.b_i")};
  const GateRefs gate_f{t.w_f, t.u_f, tensor_index(state, "lstm.w_f"),
                        tensor_index(state, "lstm.u_f"),
                        tensor_index(state, "lstm.b_f")};
  const GateRefs gate_o{t.w_o, t.u_o, tensor_index(state, "lstm.w_o"),
                        tensor_index(state, "lstm.u_o"),
                        tensor_index(state, "lstm.b_o")};
  const GateRefs gate_c{t.w_c, t.u_c, tensor_index(state, "lstm.w_c"),
                        tensor_index(state, "lstm.u_c"),
                        tensor_index(state, "lstm.b_c")};

  for (std::size_t s = steps.size(); s-- > 0;) {
    const LstmStepCache& step = steps[s];
    const auto x = embedded_row(*t.embedding, step.token);

    std::vector<double> d_pre_i(k), d_pre_f(k), d_pre_o(k), d_pre_c(k);
    std::vector<double> dc_prev(k);
    for (std::size_t j = 0; j < k; ++j) {
      const double d_out_gate = dh[j] * step.tanh_cell[j];
      const double dcell =
          dc[j] + dh[j] * step.gate_o[j] * (1.0 - step.tanh_cell[j] * step.tanh_cell[j]);
      const double d_in_gate = dcell * step.candidate[j];
      const double d_forget_gate = dcell * step.c_prev[j];
      const double d_candidate = dcell * step.gate_i[j];
      dc_prev[j] = dcell * step.gate_f[j];

      d_pre_i[j] = d_in_gate * step.gate_i[j] * (1.0 - step.gate_i[j]);
      d_pre_f[j] = d_forget_gate * step.gate_f[j] * (1.0 - step.gate_f[j]);
      d_pre_o[j] = d_out_gate * step.gate_o[j] * (1.0 - step.gate_o[j]);
      d_pre_c[j] = d_candidate * (1.0 - step.candidate[j] * step.candidate[j]);
    }

    std::vector<double> dx(static_cast<std::size_t>(spec.n_e), 0.0);
    std::vector<double> dh_prev(k, 0.0);
    const auto backprop_gate = [&](const GateRefs& gate,
                                   const std::vector<double>& d_pre) {
      Matrix& g_w = grads.tensors[gate.iw];
      Matrix& g_u = grads.tensors[gate.iu];
      Matrix& g_b = grads.tensors[gate.ib];
      for (std::size_t j = 0; j < k; ++j) {
        const double d = d_pre[j];
        if (d == 0.0) {
          continue;
        }
        g_b(0, j) += d;
        for (std::size_t e = 0; e < dx.size(); ++e) {
          g_w(e, j) += x[e] * d;
          dx[e] += (*gate.w)(e, j) * d;
        }
        for (std::size_t h = 0; h < k; ++h) {
          g_u(h, j) += step.h_prev[h] * d;
          dh_prev[h] += (*gate.u)(h, j) * d;
        }
      }
    };
    backprop_gate(gate_i, d_pre_i);
    backprop_gate(gate_f, d_pre_f);
    backprop_gate(gate_o, d_pre_o);
    backprop_gate(gate_c, d_pre_c);

    Matrix& g_emb = grads.tensors[i_emb];
    for (std::size_t e = 0; e < dx.size(); ++e) {
      g_emb(static_cast<std::size_t>(step.token), e) += dx[e];
    }
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }

  grads.loss = loss;
  return grads;
}

namespace {

// Shared SGD skeleton over an abstract sample set. `backward(i)` returns the
// per-sample (or per-row-batch) gradients; `update` applies them.
template <typename BatchGrad>
TrainResult sgd_loop(NetworkState initial, std::size_t n_train, int epochs,
                     int batch_size, double lr, Rng& rng,
                     const BatchGrad& batch_gradients,
                     const std::function<double(const NetworkState&)>& val_acc) {
  TrainResult result;
  result.state = std::move(initial);
  result.trace.reserve(static_cast<std::size_t>(epochs));

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = n_train; i > 1; --i) {
      const std::size_t j = rng.index(i);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < n_train;
         begin += static_cast<std::size_t>(batch_size)) {
      const std::size_t end =
          std::min(n_train, begin + static_cast<std::size_t>(batch_size));
      const Gradients grads = batch_gradients(result.state, order, begin, end);
      epoch_loss += grads.loss * static_cast<double>(end - begin);
      apply_sgd_step(result.state, grads, lr);
    }
    EpochStats stats;
    stats.train_loss = epoch_loss / static_cast<double>(n_train);
    stats.val_accuracy = val_acc(result.state);
    result.trace.push_back(stats);
  }
  return result;
}

}  // namespace

TrainResult sgd_train(const MlpSpec& spec, const data::TabularDataset& train,
                      const data::TabularDataset& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) {
    throw InputError("sgd_train: empty training split");
  }
  if (train.dims() != static_cast<std::size_t>(spec.n_i)) {
    throw DimensionError("sgd_train: dataset dimensionality does not match spec");
  }
  Rng rng(cfg.seed);
  NetworkState state = init_mlp(spec, derive_seed(cfg.seed, 0x11));

  const auto batch_gradients = [&](const NetworkState& s,
                                   const std::vector<std::size_t>& order,
                                   std::size_t begin, std::size_t end) {
    Matrix batch(end - begin, train.dims());
    std::vector<int> labels(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t src = order[i];
      for (std::size_t j = 0; j < train.dims(); ++j) {
        batch(i - begin, j) = train.features(src, j);
      }
      labels[i - begin] = train.labels[src];
    }
    return mlp_backward(s, batch, labels);
  };
  const std::function<double(const NetworkState&)> val_acc =
      [&](const NetworkState& s) { return accuracy(s, val); };
  return sgd_loop(std::move(state), train.size(), cfg.epochs, cfg.batch_size,
                  cfg.learning_rate, rng, batch_gradients, val_acc);
}

TrainResult sgd_train(const LstmSpec& spec, const data::TokenDataset& train,
                      const data::TokenDataset& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) {
    throw InputError("sgd_train: empty training split");
  }
  if (train.vocab_size > spec.vocab_size) {
    throw DimensionError("sgd_train: dataset vocabulary exceeds spec");
  }
  Rng rng(cfg.seed);
  NetworkState state = init_lstm(spec, derive_seed(cfg.seed, 0x11));

  const auto batch_gradients = [&](const NetworkState& s,
                                   const std::vector<std::size_t>& order,
                                   std::size_t begin, std::size_t end) {
    Gradients total = zero_gradients(s);
    const double scale = 1.0 / static_cast<double>(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t src = order[i];
      const auto tokens = truncated(train.sequences[src], cfg.max_seq_len);
      const Gradients sample = lstm_backward(s, tokens, train.labels[src]);
      accumulate(total, sample, scale);
    }
    return total;
  };
  const std::function<double(const NetworkState&)> val_acc =
      [&](const NetworkState& s) { return accuracy(s, val); };
  return sgd_loop(std::move(state), train.size(), cfg.epochs, cfg.batch_size,
                  cfg.learning_rate, rng, batch_gradients, val_acc);
}

std::vector<int> predict(const NetworkState& state,
                         const data::TabularDataset& ds) {
  const Matrix logits = mlp_forward(state, ds.features);
  std::vector<int> labels(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols; ++j) {
      if (logits(i, j) > logits(i, best)) {
        best = j;
      }
    }
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

std::vector<int> predict(const NetworkState& state,
                         const data::TokenDataset& ds) {
  std::vector<int> labels(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto logits = lstm_forward(state, ds.sequences[i]);
    labels[i] = static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  return labels;
}

namespace {

template <typename D>
double accuracy_impl(const NetworkState& state, const D& ds) {
  if (ds.size() == 0) {
    throw InputError("accuracy: empty dataset");
  }
  const auto predicted = predict(state, ds);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == ds.labels[i]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

}  // namespace

double accuracy(const NetworkState& state, const data::TabularDataset& ds) {
  return accuracy_impl(state, ds);
}

double accuracy(const NetworkState& state, const data::TokenDataset& ds) {
  return accuracy_impl(state, ds);
}

}  // namespace wf::model
