#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <doctest.h>

#include "noisy_distill/datagen.hpp"
#include "noisy_distill/errors.hpp"

using namespace noisy_distill;

namespace {

SyntheticSpec small_spec(std::uint64_t seed = 0) {
  SyntheticSpec spec;
  spec.samples = 600;
  spec.seed = seed;
  return spec;
}

std::size_t positives(const LabelVector& v) {
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), 1));
}

}  // namespace

TEST_CASE("split names round trip") {
  for (Split s : {Split::kCleanTrain, Split::kNoisyTrain, Split::kDev, Split::kTest}) {
    CHECK(parse_split(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_split("validation"), ConfigError);
}

TEST_CASE("corrupt keeps the positive count and moves flips to siblings") {
  // Two groups of three.
  const std::vector<std::vector<std::size_t>> sib{{1, 2}, {0, 2}, {0, 1}, {4, 5}, {3, 5}, {3, 4}};
  NoiseConfig noise{1.0, 1.0, 0.0, 0};
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    LabelVector truth(6, 0);
    truth[trial % 3] = 1;
    const auto out = corrupt(truth, noise, sib, rng);
    CHECK(positives(out) == 1);
    CHECK(out[trial % 3] == 0);
    // The replacement is a sibling: within the first group.
    CHECK(out[0] + out[1] + out[2] == 1);
  }
  noise.flip_rate = 0.0;
  LabelVector truth{1, 0, 0, 1, 0, 0};
  CHECK(corrupt(truth, noise, sib, rng) == truth);
  CHECK_THROWS_AS(corrupt(truth, noise, {{}}, rng), DimensionError);
}

TEST_CASE("corrupt keeps a positive with no available replacement") {
  NoiseConfig noise{1.0, 0.0, 0.0, 0};
  std::mt19937_64 rng(2);
  const LabelVector all{1, 1};
  CHECK(corrupt(all, noise, {{1}, {0}}, rng) == all);
}

TEST_CASE("flip frequency is within three binomial standard errors of flip_rate") {
  const std::vector<std::vector<std::size_t>> sib(8);
  NoiseConfig noise{0.4, 0.0, 0.0, 0};
  std::mt19937_64 rng(3);
  std::size_t flipped = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    LabelVector truth(8, 0);
    truth[t % 8] = 1;
    flipped += corrupt(truth, noise, sib, rng)[t % 8] == 0;
  }
  const double rate = static_cast<double>(flipped) / trials;
  CHECK(std::abs(rate - 0.4) < 3.0 * std::sqrt(0.4 * 0.6 / trials));
}

TEST_CASE("with one alternative label the flip is forced") {
  NoiseConfig noise{1.0, 0.0, 0.0, 0};
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) CHECK(corrupt({1, 0}, noise, {{}, {}}, rng) == LabelVector{0, 1});
}

TEST_CASE("full sibling bias: every introduced positive is a sibling of a removed one") {
  auto spec = small_spec(6);
  spec.noise = {1.0, 1.0, 0.0, 6};
  const auto g = generate(spec);
  const auto sib = sibling_table(g.graph, g.dataset.label_names);
  std::size_t checked = 0;
  for (const auto& r : g.dataset.records) {
    if (r.split != Split::kNoisyTrain) continue;
    const auto& t = *r.y_true;
    for (std::size_t m = 0; m < t.size(); ++m) {
      if (!r.y_observed[m] || t[m]) continue;
      bool from_sibling = false;
      for (std::size_t n : sib[m]) from_sibling = from_sibling || (t[n] && !r.y_observed[n]);
      CHECK(from_sibling);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("observed-label risk on noisy-train grows with flip_rate") {
  double previous = -1.0;
  for (double rate : {0.0, 0.2, 0.4, 0.8}) {
    auto spec = small_spec(8);
    spec.samples = 4000;
    spec.noise = {rate, 0.5, 0.0, 8};
    const auto g = generate(spec);
    const auto rows = g.dataset.indices({Split::kNoisyTrain});
    const Matrix y = g.dataset.observed(rows);
    const Matrix t = g.dataset.truth(rows);
    double r = 0.0;
    for (std::size_t i = 0; i < y.data().size(); ++i) {
      r += (y.data()[i] - t.data()[i]) * (y.data()[i] - t.data()[i]);
    }
    r /= static_cast<double>(rows.size());
    CHECK(r > previous);
    previous = r;
  }
}

TEST_CASE("assign_splits uses the floor formulas") {
  std::vector<Record> records(103);
  assign_splits(records, {6, 3, 1}, 0.2, 5);
  std::size_t counts[4] = {0, 0, 0, 0};
  for (const auto& r : records) ++counts[static_cast<int>(r.split)];
  // dev = floor(103 * 0.3) = 30, test = floor(10.3) = 10, train = 63, clean = floor(12.6) = 12.
  CHECK(counts[static_cast<int>(Split::kDev)] == 30);
  CHECK(counts[static_cast<int>(Split::kTest)] == 10);
  CHECK(counts[static_cast<int>(Split::kCleanTrain)] == 12);
  CHECK(counts[static_cast<int>(Split::kNoisyTrain)] == 51);
  CHECK_THROWS_AS(assign_splits(records, {6, 3, 1}, 1.0, 5), ConfigError);
  std::vector<Record> two(2);
  CHECK_THROWS_AS(assign_splits(two, {6, 3, 1}, 0.2, 5), DataError);
}

TEST_CASE("generated data has the two-level hierarchy") {
  const auto g = generate(small_spec());
  CHECK(g.dataset.label_count() == 16);
  CHECK(g.dataset.label_names.front() == "label_0_0");
  CHECK(g.dataset.feature_dim == 16);
  CHECK(g.graph.triples().size() == 16);
  CHECK(g.graph.siblings("label_1_2") ==
        std::set<std::string>{"label_1_0", "label_1_1", "label_1_3"});
  CHECK(g.dataset.records.size() == 600);
  CHECK(g.dataset.has_truth());
}

TEST_CASE("generated labels and noise obey the spec") {
  const auto spec = small_spec(4);
  const auto g = generate(spec);
  std::size_t background = 0, noisy_changed = 0;
  for (const auto& r : g.dataset.records) {
    const std::size_t k = positives(*r.y_true);
    if (k == 0) {
      ++background;
      CHECK(positives(r.y_observed) == (r.split == Split::kNoisyTrain ? 1u : 0u));
      continue;
    }
    CHECK(k >= spec.min_labels);
    CHECK(k <= spec.max_labels);
    if (r.split == Split::kNoisyTrain) {
      // Two flips can land on the same replacement, never on nothing.
      CHECK(positives(r.y_observed) >= 1);
      CHECK(positives(r.y_observed) <= k);
      noisy_changed += r.y_observed != *r.y_true;
    } else {
      CHECK(r.y_observed == *r.y_true);
    }
  }
  // floor(10%) of each split.
  std::size_t expected = 0;
  for (Split s : {Split::kCleanTrain, Split::kNoisyTrain, Split::kDev, Split::kTest}) {
    expected += g.dataset.count(s) / 10;
  }
  CHECK(background == expected);
  CHECK(noisy_changed > 0);
  CHECK(g.dataset.count(Split::kNoisyTrain) == 4 * g.dataset.count(Split::kCleanTrain));
}

TEST_CASE("generation is deterministic per seed") {
  CHECK(generate(small_spec(7)).dataset == generate(small_spec(7)).dataset);
  CHECK_FALSE(generate(small_spec(7)).dataset == generate(small_spec(8)).dataset);
  auto a = small_spec(7), b = small_spec(7);
  b.noise.seed = 1;
  CHECK_FALSE(generate(a).dataset == generate(b).dataset);
}

TEST_CASE("spec validation names the field") {
  auto spec = small_spec();
  spec.max_labels = 17;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_spec();
  spec.noise.flip_rate = 1.5;
  CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("flip_rate"), ConfigError);
  spec = small_spec();
  spec.clean_fraction = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("dataset JSON lines round trip exactly") {
  const auto g = generate(small_spec(2));
  std::ostringstream out;
  write_dataset(g.dataset, out);
  std::istringstream in(out.str());
  CHECK(read_dataset(in) == g.dataset);
}

TEST_CASE("dataset reader rejects malformed input with the line number") {
  const std::string header =
      R"({"format":"noisy-distill-v1","L":2,"d":1,"labels":["a","b"]})";
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_dataset(in, "f");
  };
  CHECK(parse(header + "\n" + R"({"id":"r","x":[0.5],"y":[1,0],"split":"dev"})" + "\n")
            .records.size() == 1);
  CHECK_THROWS_WITH_AS(parse(header + "\n" + R"({"id":"r","x":[0.5],"y":[1],"split":"dev"})"),
                       doctest::Contains("f:2"), ParseError);
  CHECK_THROWS_AS(parse(header + "\n" + R"({"id":"r","x":[0.5],"y":[2,0],"split":"dev"})"),
                  ParseError);
  CHECK_THROWS_AS(parse(header + "\n" + R"({"id":"r","x":[0.5],"y":[1,0],"split":"x"})"),
                  ParseError);
  CHECK_THROWS_AS(parse(header + "\nnot json"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
}

TEST_CASE("dataset matrices follow the requested rows") {
  const auto g = generate(small_spec(3));
  const auto rows = g.dataset.indices({Split::kDev});
  const Matrix x = g.dataset.features(rows);
  const Matrix y = g.dataset.observed(rows);
  CHECK(x.rows() == rows.size());
  CHECK(x(0, 3) == g.dataset.records[rows[0]].x[3]);
  CHECK(y(1, 5) == g.dataset.records[rows[1]].y_observed[5]);
  Dataset stripped = g.dataset;
  stripped.records[rows[0]].y_true.reset();
  CHECK_THROWS_AS(stripped.truth(rows), DataError);
}
