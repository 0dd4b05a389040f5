#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "weightforge/matrix.hpp"

namespace wf::data {

// Flat feature matrix with dense integer labels in [0, class_count).
struct TabularDataset {
  Matrix features;  // N x D
  std::vector<int> labels;
  int class_count = 0;

  std::size_t size() const { return features.rows; }
  std::size_t dims() const { return features.cols; }
};

// Token-id sequences with labels. Token id 0 is reserved as padding and is
// skipped by the recurrent models.
struct TokenDataset {
  std::vector<std::vector<int>> sequences;
  std::vector<int> labels;
  int vocab_size = 0;
  int class_count = 0;

  std::size_t size() const { return sequences.size(); }
};

struct SplitSpec {
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
  bool stratified = false;
};

template <typename D>
struct Splits {
  D train;
  D val;
  D test;
};

// Numeric CSV with a header row. Features keep header order; the label
// column is densified to 0..C-1 by first appearance.
TabularDataset load_csv(const std::string& path, const std::string& label_column);
void save_csv(const TabularDataset& ds, const std::string& path,
              const std::string& label_column = "label");

// CIFAR-10 binary batch: records of 1 label byte + 3072 pixel bytes,
// pixels scaled to [0,1] by /255.
TabularDataset load_cifar_batch(const std::string& path);
void save_cifar_batch(const TabularDataset& ds, const std::string& path);

// Token corpus, one line per sample: `<label> <id> <id> ...`.
TokenDataset load_token_corpus(const std::string& path);
void save_token_corpus(const TokenDataset& ds, const std::string& path);

// Seeded shuffle-then-slice partition (disjoint, exhaustive). With
// `stratified` the permutation happens per class before slicing.
Splits<TabularDataset> split(const TabularDataset& ds, const SplitSpec& spec);
Splits<TokenDataset> split(const TokenDataset& ds, const SplitSpec& spec);

// Gaussian clusters around seeded random centers.
TabularDataset make_blobs(int classes, int per_class, int dims, double spread,
                          std::uint64_t seed);

// Synthetic sentiment corpus whose label is exactly the majority vote of
// planted positive vs negative token sets, so the task is learnable and a
// token-counting baseline solves it.
TokenDataset make_toy_sentiment(int vocab_size, int samples, int max_len,
                                std::uint64_t seed);

}  // namespace wf::data
