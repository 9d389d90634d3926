#include "noisy_distill/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "noisy_distill/errors.hpp"

namespace noisy_distill {

namespace {

constexpr const char* kFormatTag = "noisy-distill-v1";
constexpr std::uint64_t kSplitStream = 0x243F6A8885A308D3ULL;
constexpr std::uint64_t kBackgroundStream = 0x13198A2E03707344ULL;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word.
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void check_rate(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
  }
}

// floor() that absorbs representation error just below an integer (0.1 * 30).
std::size_t floor_count(double v) { return static_cast<std::size_t>(std::floor(v + 1e-9)); }

std::string record_id(std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return "r" + digits;
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::kCleanTrain:
      return "clean-train";
    case Split::kNoisyTrain:
      return "noisy-train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "noisy-train";
}

Split parse_split(const std::string& name) {
  if (name == "clean-train") return Split::kCleanTrain;
  if (name == "noisy-train") return Split::kNoisyTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split: " + name);
}

std::vector<std::size_t> Dataset::indices(std::initializer_list<Split> splits) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (std::find(splits.begin(), splits.end(), records[i].split) != splits.end()) out.push_back(i);
  }
  return out;
}

std::size_t Dataset::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(), [&](const Record& r) { return r.split == split; }));
}

bool Dataset::has_truth() const {
  return std::all_of(records.begin(), records.end(),
                     [](const Record& r) { return r.y_true.has_value(); });
}

Matrix Dataset::features(const std::vector<std::size_t>& rows) const {
  Matrix out(rows.size(), feature_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& x = records.at(rows[i]).x;
    std::copy(x.begin(), x.end(), out.row(i).begin());
  }
  return out;
}

Matrix Dataset::observed(const std::vector<std::size_t>& rows) const {
  Matrix out(rows.size(), label_count());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& y = records.at(rows[i]).y_observed;
    std::transform(y.begin(), y.end(), out.row(i).begin(),
                   [](std::uint8_t v) { return static_cast<double>(v); });
  }
  return out;
}

Matrix Dataset::truth(const std::vector<std::size_t>& rows) const {
  Matrix out(rows.size(), label_count());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = records.at(rows[i]);
    if (!r.y_true) throw DataError("record " + r.id + " has no true labels");
    std::transform(r.y_true->begin(), r.y_true->end(), out.row(i).begin(),
                   [](std::uint8_t v) { return static_cast<double>(v); });
  }
  return out;
}

void NoiseConfig::validate() const {
  check_rate(flip_rate, "flip_rate");
  check_rate(sibling_bias, "sibling_bias");
  check_rate(background_fraction, "background_fraction");
}

void SyntheticSpec::validate() const {
  if (parents == 0) throw ConfigError("parents must be >= 1");
  if (children_per_parent == 0) throw ConfigError("children_per_parent must be >= 1");
  if (feature_dim == 0) throw ConfigError("feature_dim must be >= 1");
  if (min_labels == 0 || min_labels > max_labels) {
    throw ConfigError("labels_per_sample must satisfy 1 <= min <= max");
  }
  if (max_labels > label_count()) throw ConfigError("max labels_per_sample exceeds label count");
  if (samples == 0) throw ConfigError("samples must be >= 1");
  if (!(parent_spread >= 0.0)) throw ConfigError("parent_spread must be >= 0");
  if (!(child_spread >= 0.0)) throw ConfigError("child_spread must be >= 0");
  if (!(cluster_spread >= 0.0)) throw ConfigError("cluster_spread must be >= 0");
  if (!(background_spread >= 0.0)) throw ConfigError("background_spread must be >= 0");
  if (!(split_ratios.train > 0.0 && split_ratios.dev > 0.0 && split_ratios.test > 0.0)) {
    throw ConfigError("split_ratios must all be positive");
  }
  if (!(clean_fraction > 0.0 && clean_fraction < 1.0)) {
    throw ConfigError("clean_fraction must lie in (0, 1)");
  }
  noise.validate();
}

LabelVector corrupt(const LabelVector& y_true, const NoiseConfig& noise,
                    const std::vector<std::vector<std::size_t>>& siblings,
                    std::mt19937_64& rng) {
  if (siblings.size() != y_true.size()) {
    throw DimensionError("corrupt: sibling table does not match label count");
  }
  LabelVector out = y_true;
  if (noise.flip_rate == 0.0) return out;
  std::bernoulli_distribution flip(noise.flip_rate);
  std::bernoulli_distribution to_sibling(noise.sibling_bias);

  std::vector<std::size_t> negatives;
  for (std::size_t m = 0; m < y_true.size(); ++m) {
    if (!y_true[m]) negatives.push_back(m);
  }
  for (std::size_t m = 0; m < y_true.size(); ++m) {
    if (!y_true[m] || !flip(rng)) continue;
    std::vector<std::size_t> sibling_pool;
    for (std::size_t n : siblings[m]) {
      if (!y_true[n]) sibling_pool.push_back(n);
    }
    const bool use_sibling = to_sibling(rng) && !sibling_pool.empty();
    const auto& pool = use_sibling ? sibling_pool : negatives;
    if (pool.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    out[m] = 0;
    out[pool[pick(rng)]] = 1;
  }
  return out;
}

void assign_splits(std::vector<Record>& records, const SplitRatios& ratios, double clean_fraction,
                   std::uint64_t seed) {
  if (!(ratios.train > 0.0 && ratios.dev > 0.0 && ratios.test > 0.0)) {
    throw ConfigError("split ratios must be positive");
  }
  if (!(clean_fraction > 0.0 && clean_fraction < 1.0)) {
    throw ConfigError("clean_fraction must lie in (0, 1)");
  }
  const std::size_t n = records.size();
  if (n < 3) throw DataError("assign_splits: " + std::to_string(n) + " records cannot fill 3 splits");

  const double total = ratios.train + ratios.dev + ratios.test;
  const std::size_t n_dev = floor_count(static_cast<double>(n) * ratios.dev / total);
  const std::size_t n_test = floor_count(static_cast<double>(n) * ratios.test / total);
  const std::size_t n_train = n - n_dev - n_test;
  const std::size_t n_clean = floor_count(static_cast<double>(n_train) * clean_fraction);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 0; k < n; ++k) {
    Split s;
    if (k < n_clean) {
      s = Split::kCleanTrain;
    } else if (k < n_train) {
      s = Split::kNoisyTrain;
    } else if (k < n_train + n_dev) {
      s = Split::kDev;
    } else {
      s = Split::kTest;
    }
    records[order[k]].split = s;
  }
}

GeneratedData generate(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n_labels = spec.label_count();
  const std::size_t d = spec.feature_dim;

  GeneratedData out;
  Dataset& data = out.dataset;
  data.feature_dim = d;
  for (std::size_t p = 0; p < spec.parents; ++p) {
    const std::string parent = "group_" + std::to_string(p);
    for (std::size_t c = 0; c < spec.children_per_parent; ++c) {
      const std::string child = "label_" + std::to_string(p) + "_" + std::to_string(c);
      data.label_names.push_back(child);
      out.graph.add({parent, child, "category"});
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<Vector> centers(n_labels, Vector(d));
  for (std::size_t p = 0; p < spec.parents; ++p) {
    Vector parent(d);
    for (double& v : parent) v = spec.parent_spread * unit(rng);
    for (std::size_t c = 0; c < spec.children_per_parent; ++c) {
      Vector& center = centers[p * spec.children_per_parent + c];
      for (std::size_t j = 0; j < d; ++j) center[j] = parent[j] + spec.child_spread * unit(rng);
    }
  }

  std::uniform_int_distribution<std::size_t> count_dist(spec.min_labels, spec.max_labels);
  std::uniform_int_distribution<std::size_t> label_dist(0, n_labels - 1);
  data.records.resize(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    Record& r = data.records[i];
    r.id = record_id(i);
    LabelVector truth(n_labels, 0);
    const std::size_t k = count_dist(rng);
    for (std::size_t placed = 0; placed < k;) {
      const std::size_t m = label_dist(rng);
      if (!truth[m]) {
        truth[m] = 1;
        ++placed;
      }
    }
    r.x.assign(d, 0.0);
    for (std::size_t m = 0; m < n_labels; ++m) {
      if (!truth[m]) continue;
      for (std::size_t j = 0; j < d; ++j) r.x[j] += centers[m][j] / static_cast<double>(k);
    }
    for (double& v : r.x) v += spec.cluster_spread * unit(rng);
    r.y_observed = truth;
    r.y_true = std::move(truth);
  }

  assign_splits(data.records, spec.split_ratios, spec.clean_fraction, mix(spec.seed, kSplitStream));

  // Background replacement, an exact fraction of every split.
  std::mt19937_64 background_rng(mix(spec.seed, kBackgroundStream ^ spec.noise.seed));
  for (Split split : {Split::kCleanTrain, Split::kNoisyTrain, Split::kDev, Split::kTest}) {
    std::vector<std::size_t> members = data.indices({split});
    const std::size_t n_background =
        floor_count(static_cast<double>(members.size()) * spec.noise.background_fraction);
    std::shuffle(members.begin(), members.end(), background_rng);
    for (std::size_t b = 0; b < n_background; ++b) {
      Record& r = data.records[members[b]];
      for (double& v : r.x) v = spec.background_spread * unit(background_rng);
      r.y_true = LabelVector(n_labels, 0);
      r.y_observed = LabelVector(n_labels, 0);
      if (split == Split::kNoisyTrain) r.y_observed[label_dist(background_rng)] = 1;
    }
  }

  const auto siblings = sibling_table(out.graph, data.label_names);
  std::mt19937_64 noise_rng(mix(spec.seed, spec.noise.seed));
  for (Record& r : data.records) {
    if (r.split != Split::kNoisyTrain) continue;
    if (std::none_of(r.y_true->begin(), r.y_true->end(), [](std::uint8_t v) { return v != 0; })) {
      continue;  // background
    }
    r.y_observed = corrupt(*r.y_true, spec.noise, siblings, noise_rng);
  }
  return out;
}

namespace {

LabelVector parse_labels(const nlohmann::json& j, std::size_t expected, const char* field,
                         const std::string& source, std::size_t line) {
  if (!j.is_array()) throw ParseError(source, line, std::string(field) + " is not an array");
  if (j.size() != expected) {
    throw ParseError(source, line,
                     std::string(field) + " has length " + std::to_string(j.size()) +
                         ", expected " + std::to_string(expected));
  }
  LabelVector out(expected);
  for (std::size_t m = 0; m < expected; ++m) {
    if (!j[m].is_number_integer() || (j[m].get<int>() != 0 && j[m].get<int>() != 1)) {
      throw ParseError(source, line, std::string(field) + " entries must be 0 or 1");
    }
    out[m] = static_cast<std::uint8_t>(j[m].get<int>());
  }
  return out;
}

}  // namespace

void write_dataset(const Dataset& dataset, std::ostream& out) {
  const nlohmann::json header = {{"format", kFormatTag},
                                 {"L", dataset.label_count()},
                                 {"d", dataset.feature_dim},
                                 {"labels", dataset.label_names}};
  out << header.dump() << '\n';
  for (const auto& r : dataset.records) {
    nlohmann::json line = {{"id", r.id}, {"x", r.x}, {"y", r.y_observed}};
    if (r.y_true) line["y_true"] = *r.y_true;
    line["split"] = to_string(r.split);
    out << line.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in, const std::string& source) {
  Dataset data;
  std::string text;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(source, line_no, "expected a JSON object");
    try {
      if (!have_header) {
        if (j.value("format", std::string{}) != kFormatTag) {
          throw ParseError(source, line_no, std::string("missing header with format ") + kFormatTag);
        }
        data.label_names = j.at("labels").get<std::vector<std::string>>();
        data.feature_dim = j.at("d").get<std::size_t>();
        if (j.at("L").get<std::size_t>() != data.label_names.size()) {
          throw ParseError(source, line_no, "L disagrees with the label list");
        }
        have_header = true;
        continue;
      }
      Record r;
      r.id = j.at("id").get<std::string>();
      r.x = j.at("x").get<Vector>();
      if (r.x.size() != data.feature_dim) {
        throw ParseError(source, line_no,
                         "x has length " + std::to_string(r.x.size()) + ", expected " +
                             std::to_string(data.feature_dim));
      }
      if (!std::all_of(r.x.begin(), r.x.end(), [](double v) { return std::isfinite(v); })) {
        throw ParseError(source, line_no, "x contains a non-finite value");
      }
      r.y_observed = parse_labels(j.at("y"), data.label_count(), "y", source, line_no);
      if (j.contains("y_true")) {
        r.y_true = parse_labels(j.at("y_true"), data.label_count(), "y_true", source, line_no);
      }
      try {
        r.split = parse_split(j.at("split").get<std::string>());
      } catch (const ConfigError& e) {
        throw ParseError(source, line_no, e.what());
      }
      data.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, std::string("malformed record: ") + e.what());
    }
  }
  if (!have_header) throw ParseError(source, line_no, "missing header line");
  return data;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset file " + path);
  write_dataset(dataset, out);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset file " + path);
  return read_dataset(in, path);
}

}  // namespace noisy_distill
