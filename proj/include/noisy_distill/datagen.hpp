#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "noisy_distill/kgraph.hpp"
#include "noisy_distill/numerics.hpp"

namespace noisy_distill {

using LabelVector = std::vector<std::uint8_t>;

enum class Split { kCleanTrain, kNoisyTrain, kDev, kTest };

std::string to_string(Split split);
// Throws ConfigError for an unknown name.
Split parse_split(const std::string& name);

struct Record {
  std::string id;
  Vector x;
  LabelVector y_observed;
  std::optional<LabelVector> y_true;
  Split split = Split::kNoisyTrain;

  bool operator==(const Record&) const = default;
};

struct Dataset {
  std::vector<std::string> label_names;
  std::size_t feature_dim = 0;
  std::vector<Record> records;

  std::size_t label_count() const noexcept { return label_names.size(); }

  // Record indices whose split is one of `splits`, in file order.
  std::vector<std::size_t> indices(std::initializer_list<Split> splits) const;
  std::size_t count(Split split) const;
  bool has_truth() const;

  Matrix features(const std::vector<std::size_t>& rows) const;
  Matrix observed(const std::vector<std::size_t>& rows) const;
  // Throws DataError when a selected record lacks y_true.
  Matrix truth(const std::vector<std::size_t>& rows) const;

  bool operator==(const Dataset&) const = default;
};

struct NoiseConfig {
  // Probability that each true positive is replaced.
  double flip_rate = 0.0;
  // Given a replacement, probability it is drawn from the label's siblings.
  double sibling_bias = 0.0;
  // Fraction of each split's records replaced by background records: features
  // from a wide unrelated Gaussian and all-zero truth. In noisy-train they keep
  // one spurious observed positive; elsewhere the observed labels are clean.
  double background_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitRatios {
  double train = 6.0;
  double dev = 3.0;
  double test = 1.0;
};

struct SyntheticSpec {
  std::size_t parents = 4;
  std::size_t children_per_parent = 4;
  std::size_t feature_dim = 16;
  std::size_t min_labels = 1;
  std::size_t max_labels = 3;
  std::size_t samples = 6000;
  // Standard deviations of parent centers, of children around their parent,
  // and of a record's features around its label mean.
  double parent_spread = 2.0;
  double child_spread = 1.0;
  double cluster_spread = 0.8;
  // Standard deviation of the background feature distribution.
  double background_spread = 4.0;
  // 40% sibling-directed flips and 10% background records.
  NoiseConfig noise{0.4, 1.0, 0.1, 0};
  SplitRatios split_ratios;
  double clean_fraction = 0.2;
  std::uint64_t seed = 0;

  std::size_t label_count() const noexcept { return parents * children_per_parent; }
  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct GeneratedData {
  Dataset dataset;
  KnowledgeGraph graph;
};

// Two-level hierarchy: parent entities "group_<p>" each the "category" of
// children "label_<p>_<c>"; the children are the labels. Deterministic per
// spec.seed and spec.noise.seed.
GeneratedData generate(const SyntheticSpec& spec);

// Replaces each positive of y_true with probability flip_rate by a label that
// is not truly present: a sibling with probability sibling_bias (uniform over
// non-true labels when no sibling is available), else uniform over non-true
// labels. A positive with no available replacement is kept.
LabelVector corrupt(const LabelVector& y_true, const NoiseConfig& noise,
                    const std::vector<std::vector<std::size_t>>& siblings,
                    std::mt19937_64& rng);

// Seeded shuffle, then contiguous train/dev/test blocks with
// dev = floor(n * dev / total), test = floor(n * test / total), train = rest;
// the first floor(train * clean_fraction) train records become clean-train.
void assign_splits(std::vector<Record>& records, const SplitRatios& ratios, double clean_fraction,
                   std::uint64_t seed);

// JSON-lines: a header line, then one record per line.
void write_dataset(const Dataset& dataset, std::ostream& out);
Dataset read_dataset(std::istream& in, const std::string& source = "<stream>");
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace noisy_distill
