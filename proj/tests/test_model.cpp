#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "doctest.h"
#include "weightforge/data.hpp"
#include "weightforge/errors.hpp"
#include "weightforge/model.hpp"
#include "weightforge/rng.hpp"

using namespace wf;
using namespace wf::model;

namespace {

// ---- independent oracles -------------------------------------------------

// Naive per-element forward pass: triple-loop matmuls, nothing shared with
// the library's Matrix helpers.
std::vector<std::vector<double>> naive_mlp_logits(const NetworkState& state,
                                                  const Matrix& batch) {
  const auto& w1 = state.tensor("hidden.weight").value;
  const auto& b1 = state.tensor("hidden.bias").value;
  const auto& w2 = state.tensor("output.weight").value;
  const auto& b2 = state.tensor("output.bias").value;
  std::vector<std::vector<double>> logits(batch.rows,
                                          std::vector<double>(w2.cols, 0.0));
  for (std::size_t r = 0; r < batch.rows; ++r) {
    std::vector<double> hidden(w1.cols, 0.0);
    for (std::size_t j = 0; j < w1.cols; ++j) {
      double sum = b1(0, j);
      for (std::size_t i = 0; i < w1.rows; ++i) {
        sum += batch(r, i) * w1(i, j);
      }
      hidden[j] = state.mlp.activation == Activation::relu
                      ? (sum > 0.0 ? sum : 0.0)
                      : std::tanh(sum);
    }
    for (std::size_t c = 0; c < w2.cols; ++c) {
      double sum = b2(0, c);
      for (std::size_t j = 0; j < w2.rows; ++j) {
        sum += hidden[j] * w2(j, c);
      }
      logits[r][c] = sum;
    }
  }
  return logits;
}

double cross_entropy(const std::vector<double>& logits, int label) {
  double max_logit = logits[0];
  for (double v : logits) {
    max_logit = std::max(max_logit, v);
  }
  double sum = 0.0;
  for (double v : logits) {
    sum += std::exp(v - max_logit);
  }
  return -(logits[static_cast<std::size_t>(label)] - max_logit - std::log(sum));
}

double mlp_loss(const NetworkState& state, const Matrix& batch,
                const std::vector<int>& labels) {
  const Matrix logits = mlp_forward(state, batch);
  double loss = 0.0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    std::vector<double> row(logits.cols);
    for (std::size_t c = 0; c < logits.cols; ++c) {
      row[c] = logits(r, c);
    }
    loss += cross_entropy(row, labels[r]);
  }
  return loss / static_cast<double>(logits.rows);
}

double lstm_loss(const NetworkState& state, const std::vector<int>& tokens,
                 int label) {
  return cross_entropy(lstm_forward(state, tokens), label);
}

// Central finite differences over every tensor entry; the gradcheck
// denominator uses an absolute floor so true-zero entries stay checkable.
double max_relative_error(const NetworkState& state, const Gradients& analytic,
                          const std::function<double(const NetworkState&)>& loss,
                          double step) {
  double worst = 0.0;
  NetworkState probe = state;
  for (std::size_t t = 0; t < probe.tensors.size(); ++t) {
    for (std::size_t i = 0; i < probe.tensors[t].value.data.size(); ++i) {
      double& entry = probe.tensors[t].value.data[i];
      const double saved = entry;
      entry = saved + step;
      const double up = loss(probe);
      entry = saved - step;
      const double down = loss(probe);
      entry = saved;
      const double fd = (up - down) / (2.0 * step);
      const double a = analytic.tensors[t].data[i];
      const double rel =
          std::fabs(a - fd) / std::max(std::fabs(a) + std::fabs(fd), 1e-4);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

double gradient_norm(const Gradients& grads) {
  double sum = 0.0;
  for (const auto& tensor : grads.tensors) {
    for (double v : tensor.data) {
      sum += v * v;
    }
  }
  return std::sqrt(sum);
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-by-scalar reimplementation of the gate equations for one step.
void oracle_lstm_step(const NetworkState& state, const std::vector<double>& x,
                      const std::vector<double>& h_prev,
                      const std::vector<double>& c_prev,
                      std::vector<double>& h_out, std::vector<double>& c_out) {
  const auto pre = [&](const char* w_name, const char* u_name,
                       const char* b_name, std::size_t j) {
    const auto& w = state.tensor(w_name).value;
    const auto& u = state.tensor(u_name).value;
    const auto& b = state.tensor(b_name).value;
    double sum = b(0, j);
    for (std::size_t e = 0; e < w.rows; ++e) {
      sum += x[e] * w(e, j);
    }
    for (std::size_t h = 0; h < u.rows; ++h) {
      sum += h_prev[h] * u(h, j);
    }
    return sum;
  };
  const std::size_t k = static_cast<std::size_t>(state.lstm.n_hidden);
  h_out.resize(k);
  c_out.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double in_gate = sigmoid_ref(pre("lstm.w_i", "lstm.u_i", "lstm.b_i", j));
    const double forget = sigmoid_ref(pre("lstm.w_f", "lstm.u_f", "lstm.b_f", j));
    const double out_gate = sigmoid_ref(pre("lstm.w_o", "lstm.u_o", "lstm.b_o", j));
    const double candidate = std::tanh(pre("lstm.w_c", "lstm.u_c", "lstm.b_c", j));
    c_out[j] = forget * c_prev[j] + in_gate * candidate;
    h_out[j] = out_gate * std::tanh(c_out[j]);
  }
}

std::vector<double> oracle_lstm_logits(const NetworkState& state,
                                       const std::vector<int>& tokens) {
  const auto& embedding = state.tensor("embedding.weight").value;
  const std::size_t k = static_cast<std::size_t>(state.lstm.n_hidden);
  std::vector<double> h(k, 0.0), c(k, 0.0);
  for (int token : tokens) {
    if (token == 0) {
      continue;
    }
    std::vector<double> x(embedding.cols);
    for (std::size_t e = 0; e < embedding.cols; ++e) {
      x[e] = embedding(static_cast<std::size_t>(token), e);
    }
    std::vector<double> h_next, c_next;
    oracle_lstm_step(state, x, h, c, h_next, c_next);
    h = h_next;
    c = c_next;
  }
  const auto& w_out = state.tensor("output.weight").value;
  const auto& b_out = state.tensor("output.bias").value;
  std::vector<double> logits(w_out.cols);
  for (std::size_t o = 0; o < w_out.cols; ++o) {
    double sum = b_out(0, o);
    for (std::size_t j = 0; j < k; ++j) {
      sum += h[j] * w_out(j, o);
    }
    logits[o] = sum;
  }
  return logits;
}

void zero_state(NetworkState& state) {
  for (auto& tensor : state.tensors) {
    std::fill(tensor.value.data.begin(), tensor.value.data.end(), 0.0);
  }
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("zero MLP emits zero logits and a uniform softmax") {
  MlpSpec spec{3, 5, 4};
  NetworkState state = init_mlp(spec, 1);
  zero_state(state);
  Matrix batch(2, 3);
  batch(0, 0) = 1.5;
  batch(1, 2) = -2.0;
  const Matrix logits = mlp_forward(state, batch);
  for (double v : logits.data) {
    CHECK(v == 0.0);
  }
  const Matrix probs = softmax_rows(logits);
  for (double p : probs.data) {
    CHECK(p == 0.25);
  }
}

TEST_CASE("1x1x1 identity-like net passes its input through") {
  MlpSpec spec{1, 1, 1};
  NetworkState state = init_mlp(spec, 1);
  zero_state(state);
  state.tensor("hidden.weight").value(0, 0) = 1.0;
  state.tensor("output.weight").value(0, 0) = 1.0;
  Matrix batch(1, 1);
  batch(0, 0) = 2.0;
  const Matrix logits = mlp_forward(state, batch);
  CHECK(logits(0, 0) == 2.0);
}

TEST_CASE("forward pass matches the naive matmul oracle") {
  MlpSpec spec{4, 6, 3};
  const NetworkState state = init_mlp(spec, 42);
  Matrix batch(3, 4);
  Rng rng(7);
  for (double& v : batch.data) {
    v = rng.uniform(-2.0, 2.0);
  }
  const Matrix logits = mlp_forward(state, batch);
  const auto expected = naive_mlp_logits(state, batch);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      REQUIRE(logits(r, c) == doctest::Approx(expected[r][c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax rows sum to one for wild logits") {
  Rng rng(3);
  Matrix logits(20, 7);
  for (double& v : logits.data) {
    v = rng.uniform(-50.0, 50.0);
  }
  const Matrix probs = softmax_rows(logits);
  for (std::size_t r = 0; r < probs.rows; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < probs.cols; ++c) {
      sum += probs(r, c);
    }
    REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("forward rejects bad input") {
  MlpSpec spec{3, 4, 2};
  const NetworkState state = init_mlp(spec, 5);
  Matrix wrong(2, 4);
  CHECK_THROWS_AS(mlp_forward(state, wrong), DimensionError);
  Matrix bad(1, 3);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(mlp_forward(state, bad), InputError);
}

TEST_CASE("saturated correct prediction has a vanishing gradient") {
  MlpSpec spec{2, 3, 3};
  NetworkState state = init_mlp(spec, 2);
  zero_state(state);
  state.tensor("output.bias").value(0, 0) = 40.0;  // class 0 certain
  Matrix batch(1, 2);
  batch(0, 0) = 0.3;
  const Gradients grads = mlp_backward(state, batch, {0});
  CHECK(gradient_norm(grads) < 1e-8);
}

TEST_CASE("uniform predictions over four classes cost ln 4 per sample") {
  MlpSpec spec{2, 3, 4};
  NetworkState state = init_mlp(spec, 2);
  zero_state(state);
  Matrix batch(2, 2);
  batch(0, 0) = 1.0;
  batch(1, 1) = -1.0;
  const Gradients grads = mlp_backward(state, batch, {1, 3});
  CHECK(grads.loss == doctest::Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("mlp analytic gradients match central finite differences") {
  for (std::uint64_t seed : {42ULL, 0ULL, 1ULL, 2ULL, 3ULL}) {
    MlpSpec spec{4, 6, 3};
    const NetworkState state = init_mlp(spec, seed);
    Matrix batch(8, 4);
    std::vector<int> labels(8);
    Rng rng(seed + 100);
    for (double& v : batch.data) {
      v = rng.uniform(-1.5, 1.5);
    }
    for (int& label : labels) {
      label = static_cast<int>(rng.index(3));
    }
    const Gradients grads = mlp_backward(state, batch, labels);
    const double worst = max_relative_error(
        state, grads,
        [&](const NetworkState& s) { return mlp_loss(s, batch, labels); }, 1e-5);
    REQUIRE(worst < 1e-5);
  }
}

TEST_CASE("tanh hidden activation also passes the gradient check") {
  MlpSpec spec{3, 5, 2};
  spec.activation = Activation::tanh_;
  const NetworkState state = init_mlp(spec, 11);
  Matrix batch(4, 3);
  Rng rng(12);
  for (double& v : batch.data) {
    v = rng.uniform(-1.0, 1.0);
  }
  const std::vector<int> labels{0, 1, 1, 0};
  const Gradients grads = mlp_backward(state, batch, labels);
  const double worst = max_relative_error(
      state, grads,
      [&](const NetworkState& s) { return mlp_loss(s, batch, labels); }, 1e-5);
  CHECK(worst < 1e-5);
}

TEST_CASE("backward rejects out-of-range labels") {
  MlpSpec spec{2, 3, 2};
  const NetworkState state = init_mlp(spec, 4);
  Matrix batch(1, 2);
  CHECK_THROWS_AS(mlp_backward(state, batch, {2}), InputError);
  CHECK_THROWS_AS(mlp_backward(state, Matrix(0, 2), {}), InputError);
}

TEST_CASE("zero-weight lstm step halves the conveyor") {
  LstmSpec spec{6, 3, 4, 2};
  NetworkState state = init_lstm(spec, 1);
  zero_state(state);
  const std::vector<double> x(3, 0.7);
  const std::vector<double> h_prev(4, 0.2);
  std::vector<double> c_prev(4);
  for (std::size_t j = 0; j < 4; ++j) {
    c_prev[j] = 0.8 - 0.3 * static_cast<double>(j);
  }
  std::vector<double> h, c;
  lstm_step(state, x, h_prev, c_prev, h, c);
  for (std::size_t j = 0; j < 4; ++j) {
    REQUIRE(c[j] == doctest::Approx(0.5 * c_prev[j]).epsilon(1e-15));
    REQUIRE(h[j] ==
            doctest::Approx(0.5 * std::tanh(0.5 * c_prev[j])).epsilon(1e-15));
  }
}

TEST_CASE("zero cell state and zero weights give exactly zero hidden output") {
  LstmSpec spec{6, 3, 4, 2};
  NetworkState state = init_lstm(spec, 1);
  zero_state(state);
  std::vector<double> h, c;
  lstm_step(state, std::vector<double>(3, 1.0), std::vector<double>(4, 0.0),
            std::vector<double>(4, 0.0), h, c);
  for (double v : h) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("lstm step matches the scalar oracle on a seeded state") {
  LstmSpec spec{9, 4, 5, 3};
  const NetworkState state = init_lstm(spec, 7);
  Rng rng(70);
  std::vector<double> x(4), h_prev(5), c_prev(5);
  for (double& v : x) {
    v = rng.uniform(-1.0, 1.0);
  }
  for (double& v : h_prev) {
    v = rng.uniform(-1.0, 1.0);
  }
  for (double& v : c_prev) {
    v = rng.uniform(-1.0, 1.0);
  }
  std::vector<double> h, c, h_ref, c_ref;
  lstm_step(state, x, h_prev, c_prev, h, c);
  oracle_lstm_step(state, x, h_prev, c_prev, h_ref, c_ref);
  for (std::size_t j = 0; j < 5; ++j) {
    REQUIRE(h[j] == doctest::Approx(h_ref[j]).epsilon(1e-12));
    REQUIRE(c[j] == doctest::Approx(c_ref[j]).epsilon(1e-12));
  }
}

TEST_CASE("gate activations keep state and output inside their envelopes") {
  // Gates in (0,1) bound |h| below 1 and |c| below |c_prev| + 1.
  LstmSpec spec{9, 4, 5, 3};
  const NetworkState state = init_lstm(spec, 13);
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(4), h_prev(5), c_prev(5);
    for (double& v : x) {
      v = rng.uniform(-3.0, 3.0);
    }
    for (double& v : h_prev) {
      v = rng.uniform(-1.0, 1.0);
    }
    for (double& v : c_prev) {
      v = rng.uniform(-4.0, 4.0);
    }
    std::vector<double> h, c;
    lstm_step(state, x, h_prev, c_prev, h, c);
    for (std::size_t j = 0; j < 5; ++j) {
      REQUIRE(std::fabs(h[j]) < 1.0);
      REQUIRE(std::fabs(c[j]) < std::fabs(c_prev[j]) + 1.0);
    }
  }
}

TEST_CASE("length-1 zero-weight forward gives uniform logits") {
  LstmSpec spec{6, 3, 4, 2};
  NetworkState state = init_lstm(spec, 1);
  zero_state(state);
  const auto logits = lstm_forward(state, {2});
  CHECK(logits == std::vector<double>{0.0, 0.0});
}

TEST_CASE("length-2 zero-weight forward still ends at the output bias") {
  LstmSpec spec{6, 3, 4, 2};
  NetworkState state = init_lstm(spec, 1);
  zero_state(state);
  state.tensor("output.bias").value(0, 1) = 0.25;
  const auto logits = lstm_forward(state, {2, 4});
  CHECK(logits[0] == 0.0);
  CHECK(logits[1] == 0.25);
}

TEST_CASE("length-5 forward matches the unrolled scalar oracle") {
  LstmSpec spec{9, 4, 5, 3};
  const NetworkState state = init_lstm(spec, 7);
  const std::vector<int> tokens{3, 1, 8, 2, 5};
  const auto logits = lstm_forward(state, tokens);
  const auto expected = oracle_lstm_logits(state, tokens);
  for (std::size_t c = 0; c < 3; ++c) {
    REQUIRE(logits[c] == doctest::Approx(expected[c]).epsilon(1e-12));
  }
}

TEST_CASE("padding tokens carry the state through unchanged") {
  LstmSpec spec{9, 4, 5, 3};
  const NetworkState state = init_lstm(spec, 19);
  const auto plain = lstm_forward(state, {3, 7});
  const auto padded = lstm_forward(state, {0, 3, 0, 7, 0});
  CHECK(plain == padded);
}

TEST_CASE("lstm forward rejects bad sequences") {
  LstmSpec spec{6, 3, 4, 2};
  const NetworkState state = init_lstm(spec, 1);
  CHECK_THROWS_AS(lstm_forward(state, {}), InputError);
  CHECK_THROWS_AS(lstm_forward(state, {6}), InputError);
  CHECK_THROWS_AS(lstm_forward(state, {-1}), InputError);
}

TEST_CASE("bptt gradients match central finite differences") {
  LstmSpec spec{8, 3, 4, 3};
  const NetworkState state = init_lstm(spec, 7);
  const std::vector<int> tokens{2, 5, 1, 7};
  const int label = 1;
  const Gradients grads = lstm_backward(state, tokens, label);
  CHECK(grads.loss > 0.0);
  const double worst = max_relative_error(
      state, grads,
      [&](const NetworkState& s) { return lstm_loss(s, tokens, label); }, 1e-5);
  CHECK(worst < 1e-4);
}

TEST_CASE("bptt over five seeds stays within gradcheck tolerance") {
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL, 3ULL, 4ULL}) {
    LstmSpec spec{7, 3, 3, 2};
    const NetworkState state = init_lstm(spec, seed);
    Rng rng(seed + 50);
    std::vector<int> tokens(4);
    for (int& token : tokens) {
      token = 1 + static_cast<int>(rng.index(6));
    }
    const int label = static_cast<int>(rng.index(2));
    const Gradients grads = lstm_backward(state, tokens, label);
    const double worst = max_relative_error(
        state, grads,
        [&](const NetworkState& s) { return lstm_loss(s, tokens, label); },
        1e-5);
    REQUIRE(worst < 1e-4);
  }
}

TEST_CASE("single-step gradients match the hand-derived chain rule") {
  LstmSpec spec{5, 2, 2, 2};
  const NetworkState state = init_lstm(spec, 23);
  const int token = 3;
  const int label = 1;
  const Gradients grads = lstm_backward(state, {token}, label);

  const auto& embedding = state.tensor("embedding.weight").value;
  const std::size_t k = 2;
  std::vector<double> x{embedding(token, 0), embedding(token, 1)};

  // Forward pieces, written out symbol by symbol.
  const auto pre_for = [&](const char* w, const char* u, const char* b,
                           std::size_t j) {
    const auto& wm = state.tensor(w).value;
    const auto& bm = state.tensor(b).value;
    (void)u;  // h_prev = 0 kills the recurrent term
    double sum = bm(0, j);
    for (std::size_t e = 0; e < 2; ++e) {
      sum += x[e] * wm(e, j);
    }
    return sum;
  };
  std::vector<double> gate_i(k), gate_o(k), cand(k), cell(k), th(k), hidden(k);
  for (std::size_t j = 0; j < k; ++j) {
    gate_i[j] = sigmoid_ref(pre_for("lstm.w_i", "lstm.u_i", "lstm.b_i", j));
    gate_o[j] = sigmoid_ref(pre_for("lstm.w_o", "lstm.u_o", "lstm.b_o", j));
    cand[j] = std::tanh(pre_for("lstm.w_c", "lstm.u_c", "lstm.b_c", j));
    cell[j] = gate_i[j] * cand[j];  // c_prev = 0 kills the forget term
    th[j] = std::tanh(cell[j]);
    hidden[j] = gate_o[j] * th[j];
  }
  const auto& w_out = state.tensor("output.weight").value;
  const auto& b_out = state.tensor("output.bias").value;
  std::vector<double> logits(2), probs(2);
  for (std::size_t c = 0; c < 2; ++c) {
    logits[c] = b_out(0, c) + hidden[0] * w_out(0, c) + hidden[1] * w_out(1, c);
  }
  const double max_logit = std::max(logits[0], logits[1]);
  const double z =
      std::exp(logits[0] - max_logit) + std::exp(logits[1] - max_logit);
  for (std::size_t c = 0; c < 2; ++c) {
    probs[c] = std::exp(logits[c] - max_logit) / z;
  }
  std::vector<double> dlogits = probs;
  dlogits[label] -= 1.0;

  std::vector<double> dh(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t c = 0; c < 2; ++c) {
      dh[j] += w_out(j, c) * dlogits[c];
    }
  }
  const auto tensor_grad = [&](const char* name) -> const Matrix& {
    for (std::size_t t = 0; t < state.tensors.size(); ++t) {
      if (state.tensors[t].name == name) {
        return grads.tensors[t];
      }
    }
    throw std::logic_error("tensor not found");
  };
  for (std::size_t c = 0; c < 2; ++c) {
    REQUIRE(tensor_grad("output.bias")(0, c) ==
            doctest::Approx(dlogits[c]).epsilon(1e-14));
    for (std::size_t j = 0; j < k; ++j) {
      REQUIRE(tensor_grad("output.weight")(j, c) ==
              doctest::Approx(hidden[j] * dlogits[c]).epsilon(1e-14));
    }
  }

  // Gate-level chain rule: da_i, da_o, da_c (forget gate sees zero signal).
  for (std::size_t j = 0; j < k; ++j) {
    const double d_out_gate = dh[j] * th[j];
    const double d_cell = dh[j] * gate_o[j] * (1.0 - th[j] * th[j]);
    const double da_o = d_out_gate * gate_o[j] * (1.0 - gate_o[j]);
    const double da_i = d_cell * cand[j] * gate_i[j] * (1.0 - gate_i[j]);
    const double da_c = d_cell * gate_i[j] * (1.0 - cand[j] * cand[j]);

    REQUIRE(tensor_grad("lstm.b_i")(0, j) == doctest::Approx(da_i).epsilon(1e-14));
    REQUIRE(tensor_grad("lstm.b_o")(0, j) == doctest::Approx(da_o).epsilon(1e-14));
    REQUIRE(tensor_grad("lstm.b_c")(0, j) == doctest::Approx(da_c).epsilon(1e-14));
    REQUIRE(tensor_grad("lstm.b_f")(0, j) == 0.0);
    for (std::size_t e = 0; e < 2; ++e) {
      REQUIRE(tensor_grad("lstm.w_i")(e, j) ==
              doctest::Approx(x[e] * da_i).epsilon(1e-14));
      REQUIRE(tensor_grad("lstm.u_i")(e, j) == 0.0);  // h_prev = 0
    }
  }
}

TEST_CASE("saturated lstm prediction has a vanishing gradient") {
  LstmSpec spec{5, 2, 3, 2};
  NetworkState state = init_lstm(spec, 3);
  zero_state(state);
  state.tensor("output.bias").value(0, 0) = 40.0;
  const Gradients grads = lstm_backward(state, {1, 2}, 0);
  CHECK(gradient_norm(grads) < 1e-6);
}

TEST_CASE("separable blobs train to perfect accuracy") {
  const auto blobs = data::make_blobs(2, 40, 2, 0.15, 9);
  MlpSpec spec{2, 8, 2};
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.1;
  cfg.seed = 1;
  const auto result = sgd_train(spec, blobs, blobs, cfg);
  CHECK(result.trace.size() == 50);
  CHECK(accuracy(result.state, blobs) == 1.0);
}

TEST_CASE("zero learning rate keeps the initial state bit-for-bit") {
  const auto blobs = data::make_blobs(2, 10, 2, 0.3, 4);
  MlpSpec spec{2, 4, 2};
  TrainConfig one_epoch{1, 8, 0.0, 77};
  TrainConfig five_epochs{5, 8, 0.0, 77};
  const auto short_run = sgd_train(spec, blobs, blobs, one_epoch);
  const auto long_run = sgd_train(spec, blobs, blobs, five_epochs);
  for (std::size_t t = 0; t < short_run.state.tensors.size(); ++t) {
    REQUIRE(short_run.state.tensors[t].value.data ==
            long_run.state.tensors[t].value.data);
  }
  for (const auto& epoch : long_run.trace) {
    REQUIRE(epoch.val_accuracy == long_run.trace[0].val_accuracy);
    // Shuffling regroups the batches, so the mean loss only matches up to
    // summation order.
    REQUIRE(epoch.train_loss ==
            doctest::Approx(long_run.trace[0].train_loss).epsilon(1e-12));
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto blobs = data::make_blobs(3, 20, 2, 0.4, 6);
  MlpSpec spec{2, 6, 3};
  TrainConfig cfg{12, 8, 0.05, 31};
  const auto a = sgd_train(spec, blobs, blobs, cfg);
  const auto b = sgd_train(spec, blobs, blobs, cfg);
  for (std::size_t t = 0; t < a.state.tensors.size(); ++t) {
    REQUIRE(a.state.tensors[t].value.data == b.state.tensors[t].value.data);
  }
  for (std::size_t e = 0; e < a.trace.size(); ++e) {
    REQUIRE(a.trace[e].train_loss == b.trace[e].train_loss);
    REQUIRE(a.trace[e].val_accuracy == b.trace[e].val_accuracy);
  }
}

TEST_CASE("full-batch descent with a small step never increases the loss") {
  const auto blobs = data::make_blobs(2, 16, 2, 0.5, 15);
  MlpSpec spec{2, 6, 2};
  NetworkState state = init_mlp(spec, 8);
  double previous = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 20; ++step) {
    const Gradients grads = mlp_backward(state, blobs.features, blobs.labels);
    REQUIRE(grads.loss <= previous + 1e-12);
    previous = grads.loss;
    for (std::size_t t = 0; t < state.tensors.size(); ++t) {
      for (std::size_t i = 0; i < state.tensors[t].value.data.size(); ++i) {
        state.tensors[t].value.data[i] -= 1e-4 * grads.tensors[t].data[i];
      }
    }
  }
}

TEST_CASE("lstm trainer learns the toy sentiment task above chance") {
  const auto corpus = data::make_toy_sentiment(24, 200, 8, 3);
  LstmSpec spec{24, 8, 12, 2};
  TrainConfig cfg{20, 8, 0.1, 5};
  const auto result = sgd_train(spec, corpus, corpus, cfg);
  CHECK(result.trace.size() == 20);
  CHECK(accuracy(result.state, corpus) > 0.9);
}

TEST_CASE("sgd_train rejects an empty training split") {
  data::TabularDataset empty;
  empty.features = Matrix(0, 2);
  empty.class_count = 2;
  MlpSpec spec{2, 4, 2};
  TrainConfig cfg{1, 4, 0.1, 0};
  CHECK_THROWS_AS(sgd_train(spec, empty, empty, cfg), InputError);
}

}  // TEST_SUITE
