#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "weightforge/data.hpp"
#include "weightforge/errors.hpp"

using namespace wf;
using namespace wf::data;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("wf_data_" + name)).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("csv loader keeps shape and row order") {
  const auto path = temp_path("basic.csv");
  write_file(path, "x,y,label\n1.0,2.0,a\n3.0,4.0,b\n5.0,6.0,a\n");
  const auto ds = load_csv(path, "label");
  CHECK(ds.size() == 3);
  CHECK(ds.dims() == 2);
  CHECK(ds.features(0, 0) == 1.0);
  CHECK(ds.features(2, 1) == 6.0);
}

TEST_CASE("csv labels densify in first-appearance order") {
  const auto path = temp_path("labels.csv");
  write_file(path, "x,label\n0.1,7\n0.2,2\n0.3,7\n");
  const auto ds = load_csv(path, "label");
  CHECK(ds.labels == std::vector<int>{0, 1, 0});
  CHECK(ds.class_count == 2);
}

TEST_CASE("csv parse errors name the offending cell") {
  const auto nan_path = temp_path("nan.csv");
  write_file(nan_path, "x,label\nnan,0\n");
  CHECK_THROWS_AS(load_csv(nan_path, "label"), ParseError);

  const auto text_path = temp_path("text.csv");
  write_file(text_path, "x,y,label\n1.0,oops,0\n");
  try {
    load_csv(text_path, "label");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find("row 1") != std::string::npos);
    CHECK(what.find("column 1") != std::string::npos);
  }

  const auto missing_path = temp_path("missing.csv");
  write_file(missing_path, "x,y\n1.0,2.0\n");
  CHECK_THROWS_AS(load_csv(missing_path, "label"), SchemaError);
}

TEST_CASE("cifar loader decodes a hand-assembled fixture") {
  const auto path = temp_path("cifar.bin");
  std::string bytes;
  bytes.push_back(3);  // label
  for (int i = 0; i < 3072; ++i) {
    bytes.push_back(static_cast<char>(i % 251));
  }
  bytes.push_back(7);  // second record, all-255 pixels
  for (int i = 0; i < 3072; ++i) {
    bytes.push_back(static_cast<char>(255));
  }
  write_file(path, bytes);

  const auto ds = load_cifar_batch(path);
  CHECK(ds.size() == 2);
  CHECK(ds.class_count == 10);
  CHECK(ds.labels == std::vector<int>{3, 7});
  CHECK(ds.features(0, 0) == 0.0);
  CHECK(ds.features(0, 17) == doctest::Approx(17.0 / 255.0).epsilon(1e-15));
  for (std::size_t j = 0; j < 3072; ++j) {
    REQUIRE(ds.features(1, j) == 1.0);
  }
}

TEST_CASE("cifar loader rejects truncated files") {
  const auto path = temp_path("cifar_trunc.bin");
  write_file(path, std::string(3072, 'x'));  // one byte short of a record
  CHECK_THROWS_AS(load_cifar_batch(path), FormatError);
}

TEST_CASE("cifar round-trips through the binary layout") {
  TabularDataset ds;
  ds.class_count = 10;
  ds.features = Matrix(3, 3072);
  ds.labels = {0, 9, 4};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3072; ++j) {
      ds.features(i, j) = static_cast<double>((i * 31 + j) % 256) / 255.0;
    }
  }
  const auto path = temp_path("cifar_rt.bin");
  save_cifar_batch(ds, path);
  const auto reloaded = load_cifar_batch(path);
  CHECK(reloaded.labels == ds.labels);
  CHECK(reloaded.features.data == ds.features.data);
}

TEST_CASE("token corpus round-trips") {
  TokenDataset ds;
  ds.sequences = {{1, 2, 3}, {4, 1}};
  ds.labels = {1, 0};
  ds.vocab_size = 5;
  ds.class_count = 2;
  const auto path = temp_path("tokens.txt");
  save_token_corpus(ds, path);
  const auto reloaded = load_token_corpus(path);
  CHECK(reloaded.sequences == ds.sequences);
  CHECK(reloaded.labels == ds.labels);
  CHECK(reloaded.vocab_size == 5);
}

TEST_CASE("split slices 100 rows as 80/10/10") {
  const auto ds = make_blobs(2, 50, 3, 0.5, 11);
  SplitSpec spec;
  spec.seed = 4;
  const auto splits = split(ds, spec);
  CHECK(splits.train.size() == 80);
  CHECK(splits.val.size() == 10);
  CHECK(splits.test.size() == 10);
}

TEST_CASE("split is deterministic per seed") {
  const auto ds = make_blobs(2, 30, 2, 0.5, 11);
  SplitSpec spec;
  spec.train_fraction = 0.6;
  spec.val_fraction = 0.2;
  spec.test_fraction = 0.2;
  spec.seed = 99;
  const auto first = split(ds, spec);
  const auto second = split(ds, spec);
  CHECK(first.train.features.data == second.train.features.data);
  CHECK(first.val.labels == second.val.labels);
  CHECK(first.test.features.data == second.test.features.data);
}

TEST_CASE("split partitions indices exactly for 50 seeds") {
  // Feature column 0 holds the original row id, so the union of parts can be
  // compared against the full index set.
  const std::size_t n = 73;
  TabularDataset ds;
  ds.class_count = 3;
  ds.features = Matrix(n, 1);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.features(i, 0) = static_cast<double>(i);
    ds.labels[i] = static_cast<int>(i % 3);
  }
  SplitSpec spec;
  spec.train_fraction = 0.7;
  spec.val_fraction = 0.15;
  spec.test_fraction = 0.15;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    spec.seed = seed;
    const auto splits = split(ds, spec);
    std::multiset<long> seen;
    for (const auto* part : {&splits.train, &splits.val, &splits.test}) {
      for (std::size_t i = 0; i < part->size(); ++i) {
        seen.insert(std::lround(part->features(i, 0)));
      }
    }
    REQUIRE(seen.size() == n);
    long expect = 0;
    for (long id : seen) {
      REQUIRE(id == expect);  // multiset sorted: 0..n-1 each exactly once
      ++expect;
    }
  }
}

TEST_CASE("split rejects fractions that empty a slice") {
  const auto ds = make_blobs(2, 10, 2, 0.5, 1);
  SplitSpec spec;
  spec.train_fraction = 0.98;
  spec.val_fraction = 0.01;
  spec.test_fraction = 0.01;
  spec.seed = 1;
  CHECK_THROWS_AS(split(ds, spec), ConfigError);

  spec.train_fraction = 0.5;
  spec.val_fraction = 0.2;
  spec.test_fraction = 0.2;  // sums to 0.9
  CHECK_THROWS_AS(split(ds, spec), ConfigError);
}

TEST_CASE("stratified split keeps classes balanced") {
  const auto ds = make_blobs(2, 50, 2, 0.5, 3);
  SplitSpec spec;
  spec.seed = 8;
  spec.stratified = true;
  const auto splits = split(ds, spec);
  const auto count_class = [](const TabularDataset& part, int label) {
    std::size_t count = 0;
    for (int l : part.labels) {
      if (l == label) {
        ++count;
      }
    }
    return count;
  };
  CHECK(count_class(splits.train, 0) == 40);
  CHECK(count_class(splits.train, 1) == 40);
  CHECK(count_class(splits.val, 0) == 5);
  CHECK(count_class(splits.test, 1) == 5);
}

TEST_CASE("blobs with zero spread sit exactly on their class centers") {
  const auto ds = make_blobs(3, 4, 2, 0.0, 21);
  CHECK(ds.size() == 12);
  for (int c = 0; c < 3; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * 4;
    for (std::size_t i = base + 1; i < base + 4; ++i) {
      CHECK(ds.features(i, 0) == ds.features(base, 0));
      CHECK(ds.features(i, 1) == ds.features(base, 1));
    }
  }
}

TEST_CASE("blobs are balanced and seed-deterministic") {
  const auto a = make_blobs(2, 50, 3, 0.4, 5);
  const auto b = make_blobs(2, 50, 3, 0.4, 5);
  CHECK(a.size() == 100);
  CHECK(a.features.data == b.features.data);
  std::size_t zeros = 0;
  for (int label : a.labels) {
    zeros += label == 0 ? 1 : 0;
  }
  CHECK(zeros == 50);
}

TEST_CASE("toy sentiment labels follow the planted-token majority") {
  const auto ds = make_toy_sentiment(40, 300, 12, 5);
  CHECK(ds.vocab_size == 40);
  CHECK(ds.class_count == 2);

  // Counting oracle: classify by comparing hits in the planted positive and
  // negative pools. The layout mirrors the generator's pool split.
  const int pool = (40 - 1) / 4;
  const int positive_begin = 1;
  const int negative_begin = positive_begin + pool;
  const int neutral_begin = negative_begin + pool;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    REQUIRE(!ds.sequences[i].empty());
    int balance = 0;
    for (int token : ds.sequences[i]) {
      REQUIRE(token >= 1);
      REQUIRE(token < ds.vocab_size);
      if (token >= positive_begin && token < negative_begin) {
        ++balance;
      } else if (token >= negative_begin && token < neutral_begin) {
        --balance;
      }
    }
    const int guess = balance > 0 ? 1 : 0;
    correct += guess == ds.labels[i] ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(ds.size()) > 0.9);
}

TEST_CASE("toy sentiment is seed-deterministic") {
  const auto a = make_toy_sentiment(30, 50, 10, 2);
  const auto b = make_toy_sentiment(30, 50, 10, 2);
  CHECK(a.sequences == b.sequences);
  CHECK(a.labels == b.labels);
}

}  // TEST_SUITE
