#include "weightforge/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "weightforge/errors.hpp"
#include "weightforge/rng.hpp"

namespace wf::data {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delim)) {
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == delim) {
    cells.emplace_back();
  }
  return cells;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_feature(const std::string& cell, std::size_t row, std::size_t col) {
  const std::string value = trim(cell);
  if (value.empty()) {
    throw ParseError("csv: empty feature cell at row " + std::to_string(row) +
                     ", column " + std::to_string(col));
  }
  std::size_t consumed = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &consumed);
  } catch (const std::exception&) {
    throw ParseError("csv: non-numeric cell '" + value + "' at row " +
                     std::to_string(row) + ", column " + std::to_string(col));
  }
  if (consumed != value.size()) {
    throw ParseError("csv: non-numeric cell '" + value + "' at row " +
                     std::to_string(row) + ", column " + std::to_string(col));
  }
  if (!std::isfinite(parsed)) {
    throw ParseError("csv: non-finite cell '" + value + "' at row " +
                     std::to_string(row) + ", column " + std::to_string(col));
  }
  return parsed;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.index(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

void validate_fractions(const SplitSpec& spec) {
  if (spec.train_fraction <= 0.0 || spec.val_fraction <= 0.0 ||
      spec.test_fraction <= 0.0) {
    throw ConfigError("split: fractions must be positive");
  }
  const double total =
      spec.train_fraction + spec.val_fraction + spec.test_fraction;
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split: fractions must sum to 1");
  }
}

// Shared permutation logic: returns the shuffled index order for either the
// plain or per-class stratified scheme.
std::vector<std::size_t> split_order(const std::vector<int>& labels,
                                     const SplitSpec& spec) {
  Rng rng(spec.seed);
  if (!spec.stratified) {
    return seeded_permutation(labels.size(), rng);
  }
  // Shuffle within each class, then interleave classes round-robin so that
  // contiguous slices stay balanced.
  std::map<int, std::vector<std::size_t>> per_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    per_class[labels[i]].push_back(i);
  }
  for (auto& [label, indices] : per_class) {
    Rng class_rng = rng.fork(static_cast<std::uint64_t>(label));
    const auto perm = seeded_permutation(indices.size(), class_rng);
    std::vector<std::size_t> shuffled(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      shuffled[i] = indices[perm[i]];
    }
    indices = std::move(shuffled);
  }
  std::vector<std::size_t> order;
  order.reserve(labels.size());
  bool emitted = true;
  for (std::size_t round = 0; emitted; ++round) {
    emitted = false;
    for (auto& [label, indices] : per_class) {
      if (round < indices.size()) {
        order.push_back(indices[round]);
        emitted = true;
      }
    }
  }
  return order;
}

struct SliceSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

SliceSizes slice_sizes(std::size_t n, const SplitSpec& spec) {
  validate_fractions(spec);
  SliceSizes sizes;
  sizes.train = static_cast<std::size_t>(
      std::llround(spec.train_fraction * static_cast<double>(n)));
  sizes.val = static_cast<std::size_t>(
      std::llround(spec.val_fraction * static_cast<double>(n)));
  if (sizes.train + sizes.val > n) {
    throw ConfigError("split: fractions leave no room for a test slice");
  }
  sizes.test = n - sizes.train - sizes.val;
  if (sizes.train == 0 || sizes.val == 0 || sizes.test == 0) {
    throw ConfigError("split: a fraction yields an empty split");
  }
  return sizes;
}

TabularDataset take_rows(const TabularDataset& ds,
                         const std::vector<std::size_t>& order,
                         std::size_t begin, std::size_t end) {
  TabularDataset out;
  out.class_count = ds.class_count;
  out.features = Matrix(end - begin, ds.dims());
  out.labels.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const std::size_t src = order[i];
    for (std::size_t j = 0; j < ds.dims(); ++j) {
      out.features(i - begin, j) = ds.features(src, j);
    }
    out.labels.push_back(ds.labels[src]);
  }
  return out;
}

TokenDataset take_rows(const TokenDataset& ds,
                       const std::vector<std::size_t>& order,
                       std::size_t begin, std::size_t end) {
  TokenDataset out;
  out.vocab_size = ds.vocab_size;
  out.class_count = ds.class_count;
  out.sequences.reserve(end - begin);
  out.labels.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    out.sequences.push_back(ds.sequences[order[i]]);
    out.labels.push_back(ds.labels[order[i]]);
  }
  return out;
}

template <typename D>
Splits<D> split_impl(const D& ds, const std::vector<int>& labels,
                     const SplitSpec& spec) {
  const SliceSizes sizes = slice_sizes(labels.size(), spec);
  const auto order = split_order(labels, spec);
  Splits<D> out;
  out.train = take_rows(ds, order, 0, sizes.train);
  out.val = take_rows(ds, order, sizes.train, sizes.train + sizes.val);
  out.test = take_rows(ds, order, sizes.train + sizes.val, labels.size());
  return out;
}

}  // namespace

TabularDataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) {
    throw FileError("csv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("csv: missing header row in " + path);
  }
  const auto header = split_line(line, ',');
  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == label_column) {
      label_idx = i;
      break;
    }
  }
  if (label_idx == header.size()) {
    throw SchemaError("csv: label column '" + label_column + "' not found");
  }

  TabularDataset ds;
  std::vector<double> values;
  std::vector<std::string> raw_labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    if (trim(line).empty()) {
      ++row;
      continue;
    }
    const auto cells = split_line(line, ',');
    if (cells.size() != header.size()) {
      throw ParseError("csv: row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    }
    for (std::size_t col = 0; col < cells.size(); ++col) {
      if (col == label_idx) {
        raw_labels.push_back(trim(cells[col]));
      } else {
        values.push_back(parse_feature(cells[col], row, col));
      }
    }
    ++row;
  }
  if (raw_labels.empty()) {
    throw InputError("csv: no data rows in " + path);
  }

  // Densify labels in first-appearance order.
  std::vector<std::string> seen;
  ds.labels.reserve(raw_labels.size());
  for (const auto& raw : raw_labels) {
    auto it = std::find(seen.begin(), seen.end(), raw);
    if (it == seen.end()) {
      seen.push_back(raw);
      ds.labels.push_back(static_cast<int>(seen.size()) - 1);
    } else {
      ds.labels.push_back(static_cast<int>(it - seen.begin()));
    }
  }
  ds.class_count = static_cast<int>(seen.size());

  const std::size_t dims = header.size() - 1;
  ds.features = Matrix(raw_labels.size(), dims);
  ds.features.data = std::move(values);
  return ds;
}

void save_csv(const TabularDataset& ds, const std::string& path,
              const std::string& label_column) {
  std::ofstream out(path);
  if (!out) {
    throw FileError("csv: cannot write " + path);
  }
  for (std::size_t j = 0; j < ds.dims(); ++j) {
    out << "f" << j << ",";
  }
  out << label_column << "\n";
  char buffer[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dims(); ++j) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", ds.features(i, j));
      out << buffer << ",";
    }
    out << ds.labels[i] << "\n";
  }
}

TabularDataset load_cifar_batch(const std::string& path) {
  constexpr std::size_t kRecordBytes = 3073;
  constexpr std::size_t kPixels = 3072;

  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FileError("cifar: cannot open " + path);
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % kRecordBytes != 0) {
    throw FormatError("cifar: file size " + std::to_string(bytes.size()) +
                      " is not a multiple of 3073");
  }
  const std::size_t n = bytes.size() / kRecordBytes;
  TabularDataset ds;
  ds.class_count = 10;
  ds.features = Matrix(n, kPixels);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* record =
        reinterpret_cast<const unsigned char*>(bytes.data()) + i * kRecordBytes;
    if (record[0] >= 10) {
      throw FormatError("cifar: label byte " + std::to_string(record[0]) +
                        " out of range in record " + std::to_string(i));
    }
    ds.labels[i] = static_cast<int>(record[0]);
    for (std::size_t j = 0; j < kPixels; ++j) {
      ds.features(i, j) = static_cast<double>(record[1 + j]) / 255.0;
    }
  }
  return ds;
}

void save_cifar_batch(const TabularDataset& ds, const std::string& path) {
  if (ds.dims() != 3072) {
    throw DimensionError("cifar: dataset must have 3072 feature columns");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FileError("cifar: cannot write " + path);
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] < 0 || ds.labels[i] >= 10) {
      throw InputError("cifar: label out of range in record " + std::to_string(i));
    }
    const unsigned char label = static_cast<unsigned char>(ds.labels[i]);
    out.put(static_cast<char>(label));
    for (std::size_t j = 0; j < 3072; ++j) {
      const double scaled = ds.features(i, j) * 255.0;
      const long pixel = std::lround(scaled);
      if (pixel < 0 || pixel > 255) {
        throw InputError("cifar: pixel outside [0,1] in record " +
                         std::to_string(i));
      }
      out.put(static_cast<char>(static_cast<unsigned char>(pixel)));
    }
  }
}

TokenDataset load_token_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FileError("token corpus: cannot open " + path);
  }
  TokenDataset ds;
  std::string line;
  std::size_t row = 0;
  int max_token = 0;
  int max_label = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) {
      ++row;
      continue;
    }
    std::stringstream ss(line);
    int label = 0;
    if (!(ss >> label) || label < 0) {
      throw ParseError("token corpus: bad label on line " + std::to_string(row));
    }
    std::vector<int> tokens;
    int token = 0;
    while (ss >> token) {
      if (token < 0) {
        throw ParseError("token corpus: negative token on line " +
                         std::to_string(row));
      }
      tokens.push_back(token);
      max_token = std::max(max_token, token);
    }
    if (tokens.empty()) {
      throw ParseError("token corpus: empty sequence on line " +
                       std::to_string(row));
    }
    max_label = std::max(max_label, label);
    ds.labels.push_back(label);
    ds.sequences.push_back(std::move(tokens));
    ++row;
  }
  if (ds.sequences.empty()) {
    throw InputError("token corpus: no samples in " + path);
  }
  ds.vocab_size = max_token + 1;
  ds.class_count = max_label + 1;
  return ds;
}

void save_token_corpus(const TokenDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw FileError("token corpus: cannot write " + path);
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (int token : ds.sequences[i]) {
      out << ' ' << token;
    }
    out << '\n';
  }
}

Splits<TabularDataset> split(const TabularDataset& ds, const SplitSpec& spec) {
  return split_impl(ds, ds.labels, spec);
}

Splits<TokenDataset> split(const TokenDataset& ds, const SplitSpec& spec) {
  return split_impl(ds, ds.labels, spec);
}

TabularDataset make_blobs(int classes, int per_class, int dims, double spread,
                          std::uint64_t seed) {
  if (classes < 1 || per_class < 1 || dims < 1) {
    throw ConfigError("make_blobs: counts must be >= 1");
  }
  if (spread < 0.0) {
    throw ConfigError("make_blobs: spread must be nonnegative");
  }
  Rng rng(seed);

  // Centers drawn uniformly, redrawn while any pair is closer than 1.5 so
  // classes are distinguishable at moderate spreads.
  Matrix centers(static_cast<std::size_t>(classes), static_cast<std::size_t>(dims));
  for (int c = 0; c < classes; ++c) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      for (int d = 0; d < dims; ++d) {
        centers(c, d) = rng.uniform(-2.5, 2.5);
      }
      bool well_separated = true;
      for (int prev = 0; prev < c && well_separated; ++prev) {
        double dist2 = 0.0;
        for (int d = 0; d < dims; ++d) {
          const double diff = centers(c, d) - centers(prev, d);
          dist2 += diff * diff;
        }
        well_separated = dist2 >= 1.5 * 1.5;
      }
      if (well_separated) {
        break;
      }
    }
  }

  TabularDataset ds;
  ds.class_count = classes;
  ds.features = Matrix(static_cast<std::size_t>(classes) * per_class,
                       static_cast<std::size_t>(dims));
  ds.labels.resize(ds.features.rows);
  std::size_t row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      for (int d = 0; d < dims; ++d) {
        ds.features(row, d) = centers(c, d) + rng.normal(0.0, spread);
      }
      ds.labels[row] = c;
      ++row;
    }
  }
  return ds;
}

TokenDataset make_toy_sentiment(int vocab_size, int samples, int max_len,
                                std::uint64_t seed) {
  if (vocab_size < 8) {
    throw ConfigError("make_toy_sentiment: vocab_size must be >= 8");
  }
  if (samples < 1 || max_len < 3) {
    throw ConfigError("make_toy_sentiment: samples >= 1 and max_len >= 3 required");
  }
  Rng rng(seed);

  // Token id 0 stays reserved as padding. The remaining vocabulary splits
  // into positive / negative / neutral pools.
  const int usable = vocab_size - 1;
  const int pool = std::max(1, usable / 4);
  const int positive_begin = 1;
  const int negative_begin = positive_begin + pool;
  const int neutral_begin = negative_begin + pool;

  const auto sentiment = [&](int token) {
    if (token >= positive_begin && token < negative_begin) {
      return 1;
    }
    if (token >= negative_begin && token < neutral_begin) {
      return -1;
    }
    return 0;
  };

  TokenDataset ds;
  ds.vocab_size = vocab_size;
  ds.class_count = 2;
  ds.sequences.reserve(samples);
  ds.labels.reserve(samples);
  for (int s = 0; s < samples; ++s) {
    const int target = static_cast<int>(rng.index(2));
    const std::size_t length = 3 + rng.index(static_cast<std::size_t>(max_len - 2));
    std::vector<int> tokens(length);
    int balance = 0;  // positive count minus negative count
    for (std::size_t t = 0; t < length; ++t) {
      const double roll = rng.uniform01();
      int token = 0;
      if (roll < 0.55) {
        const int base = target == 1 ? positive_begin : negative_begin;
        token = base + static_cast<int>(rng.index(static_cast<std::size_t>(pool)));
      } else if (roll < 0.65) {
        const int base = target == 1 ? negative_begin : positive_begin;
        token = base + static_cast<int>(rng.index(static_cast<std::size_t>(pool)));
      } else {
        const int neutral_pool = vocab_size - neutral_begin;
        token = neutral_pool > 0
                    ? neutral_begin +
                          static_cast<int>(rng.index(
                              static_cast<std::size_t>(neutral_pool)))
                    : positive_begin;
      }
      tokens[t] = token;
      balance += sentiment(token);
    }
    // Break ties toward the target so the majority rule defines the label:
    // swap the first token not already carrying the target sign for one from
    // the target pool. One such token always exists when the counts tie.
    if (balance == 0) {
      const int want = target == 1 ? 1 : -1;
      for (auto& token : tokens) {
        if (sentiment(token) != want) {
          balance -= sentiment(token);
          token = target == 1 ? positive_begin : negative_begin;
          balance += want;
          break;
        }
      }
    }
    ds.sequences.push_back(std::move(tokens));
    ds.labels.push_back(balance > 0 ? 1 : 0);
  }
  return ds;
}

}  // namespace wf::data
