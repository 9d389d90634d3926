#include "noisy_distill/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "noisy_distill/errors.hpp"
#include "noisy_distill/kernels.hpp"

namespace noisy_distill {

namespace {

void check_aligned(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": collections are not aligned (" +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

void check_nonempty(const Matrix& truth, const char* what) {
  if (truth.rows() == 0) throw DataError(std::string(what) + ": empty collection");
}

Estimate estimate(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  Estimate e;
  e.mean = kernels::omp::sum(values) / n;
  if (values.size() < 2) return e;
  Vector sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - e.mean;
    sq[i] = d * d;
  }
  e.standard_error = std::sqrt(kernels::omp::sum(sq) / (n - 1.0) / n);
  return e;
}

Vector blend_losses(double lambda, const Matrix& y, const Matrix& s, const Matrix& truth) {
  Vector per_sample(truth.rows());
  kernels::omp::row_blend_sq_dist(lambda, y, s, truth, per_sample);
  return per_sample;
}

}  // namespace

double risk(const Matrix& candidate, const Matrix& truth) {
  return risk_estimate(candidate, truth).mean;
}

Estimate risk_estimate(const Matrix& candidate, const Matrix& truth) {
  check_aligned(candidate, truth, "risk");
  check_nonempty(truth, "risk");
  Vector per_sample(truth.rows());
  kernels::omp::row_sq_dist(candidate, truth, per_sample);
  return estimate(per_sample);
}

OptimalLambda optimal_lambda(double r_y, double r_s) {
  if (!(r_y >= 0.0 && r_s >= 0.0)) throw ParameterError("optimal_lambda: risks must be >= 0");
  if (r_y + r_s == 0.0) throw ParameterError("optimal_lambda: both risks are zero");
  return {r_s / (r_s + r_y), r_y * r_s / (r_s + r_y)};
}

OptimalLambda smoothing_risk(double r_y, double r_u) {
  if (!(r_y >= 0.0 && r_u >= 0.0)) throw ParameterError("smoothing_risk: risks must be >= 0");
  if (r_y + r_u == 0.0) throw ParameterError("smoothing_risk: both risks are zero");
  return {r_u / (r_u + r_y), r_y * r_u / (r_y + r_u)};
}

double uniform_risk(const Matrix& truth) {
  check_nonempty(truth, "uniform_risk");
  if (truth.cols() == 0) throw DataError("uniform_risk: zero labels");
  const Matrix uniform(truth.rows(), truth.cols(), 1.0 / static_cast<double>(truth.cols()));
  return risk(uniform, truth);
}

Estimate cross_term(const Matrix& y, const Matrix& s, const Matrix& truth) {
  check_aligned(y, truth, "cross_term");
  check_aligned(s, truth, "cross_term");
  check_nonempty(truth, "cross_term");
  Vector per_sample(truth.rows());
  kernels::omp::row_cross(y, s, truth, per_sample);
  return estimate(per_sample);
}

std::vector<double> lambda_grid(std::size_t points) {
  if (points < 2) throw ParameterError("lambda_grid: need at least 2 points");
  std::vector<double> grid(points);
  const double step = 1.0 / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = static_cast<double>(i) * step;
  grid.back() = 1.0;
  return grid;
}

RiskCurve risk_curve(const Matrix& y, const Matrix& s, const Matrix& truth,
                     const std::vector<double>& grid) {
  check_aligned(y, truth, "risk_curve");
  check_aligned(s, truth, "risk_curve");
  check_nonempty(truth, "risk_curve");
  if (grid.empty()) throw ParameterError("risk_curve: empty lambda grid");

  RiskCurve curve;
  const double n = static_cast<double>(truth.rows());
  curve.r_y = kernels::omp::sum(blend_losses(1.0, y, s, truth)) / n;
  curve.r_s = kernels::omp::sum(blend_losses(0.0, y, s, truth)) / n;

  double residual_sq = 0.0;
  double norm_sq = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double lambda = grid[i];
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("risk_curve: lambda outside [0,1]");
    const double r = kernels::omp::sum(blend_losses(lambda, y, s, truth)) / n;
    curve.points.push_back({lambda, r});
    if (r < best) {
      best = r;
      curve.argmin = i;
    }
    const double model = lambda * lambda * curve.r_y + (1.0 - lambda) * (1.0 - lambda) * curve.r_s;
    residual_sq += (r - model) * (r - model);
    norm_sq += r * r;
  }
  curve.fit_residual = norm_sq > 0.0 ? std::sqrt(residual_sq / norm_sq) : std::sqrt(residual_sq);
  return curve;
}

BiasVariance bias_variance(const std::vector<Matrix>& predictions, const Matrix& truth) {
  if (predictions.size() < 2) throw ParameterError("bias_variance: need at least 2 models");
  check_nonempty(truth, "bias_variance");
  for (const auto& p : predictions) check_aligned(p, truth, "bias_variance");

  const double models = static_cast<double>(predictions.size());
  Matrix main(truth.rows(), truth.cols(), 0.0);
  for (const auto& p : predictions) {
    auto acc = main.data();
    const auto src = p.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
  }
  for (double& v : main.data()) v /= models;

  BiasVariance out;
  out.bias = risk(main, truth);
  double variance = 0.0;
  for (const auto& p : predictions) variance += risk(p, main);
  out.variance = variance / models;
  return out;
}

nlohmann::json to_json(const RiskReport& report) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : report.curve) curve.push_back({{"lambda", p.lambda}, {"risk", p.risk}});
  return {
      {"R_y", report.r_y},
      {"R_s", report.r_s},
      {"R_u", report.r_u},
      {"cross_term", report.cross.mean},
      {"cross_term_standard_error", report.cross.standard_error},
      {"lambda_grid", std::move(curve)},
      {"fit_residual", report.fit_residual},
      {"lambda_star_predicted", report.lambda_star_predicted},
      {"R_min_predicted", report.r_min_predicted},
      {"lambda_star_empirical", report.lambda_star_empirical},
      {"R_min_empirical", report.r_min_empirical},
      {"improvement_standard_error", report.improvement_standard_error},
      {"bias", report.bias},
      {"variance", report.variance},
  };
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "lambda,risk\n";
  for (const auto& p : curve) out << p.lambda << ',' << p.risk << '\n';
  return out.str();
}

std::string to_string(ConstructionMode mode) {
  switch (mode) {
    case ConstructionMode::kIndependent:
      return "independent";
    case ConstructionMode::kCorrelated:
      return "correlated";
    case ConstructionMode::kTrainedAuxiliary:
      return "trained";
  }
  return "independent";
}

ConstructionMode parse_construction_mode(const std::string& name) {
  if (name == "independent") return ConstructionMode::kIndependent;
  if (name == "correlated") return ConstructionMode::kCorrelated;
  if (name == "trained") return ConstructionMode::kTrainedAuxiliary;
  throw ConfigError("unknown construction mode: " + name +
                    " (expected independent, correlated or trained)");
}

bool Prop1Result::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return !c.applicable || c.passed; });
}

Prop1Result verify_blend_risk(const Matrix& y, const Matrix& s, const Matrix& truth,
                              const std::vector<double>& grid, const Prop1Tolerances& tol,
                              ConstructionMode mode, const std::vector<Matrix>& ensemble) {
  Prop1Result result;
  RiskReport& r = result.report;

  const RiskCurve curve = risk_curve(y, s, truth, grid);
  r.r_y = curve.r_y;
  r.r_s = curve.r_s;
  r.r_u = uniform_risk(truth);
  r.cross = cross_term(y, s, truth);
  r.curve = curve.points;
  r.fit_residual = curve.fit_residual;
  if (r.r_y + r.r_s > 0.0) {
    const auto opt = optimal_lambda(r.r_y, r.r_s);
    r.lambda_star_predicted = opt.lambda;
    r.r_min_predicted = opt.min_risk;
  }
  r.lambda_star_empirical = curve.points[curve.argmin].lambda;
  r.r_min_empirical = curve.points[curve.argmin].risk;
  if (ensemble.size() >= 2) {
    const auto bv = bias_variance(ensemble, truth);
    r.bias = bv.bias;
    r.variance = bv.variance;
  }

  // Paired difference against the better endpoint.
  const double endpoint = r.r_y <= r.r_s ? 1.0 : 0.0;
  const Vector at_min = blend_losses(r.lambda_star_empirical, y, s, truth);
  const Vector at_end = blend_losses(endpoint, y, s, truth);
  Vector diff(at_min.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = at_min[i] - at_end[i];
  const Estimate improvement = estimate(diff);
  const Estimate at_min_estimate = estimate(at_min);
  r.improvement_standard_error = improvement.standard_error;

  const bool independent = mode == ConstructionMode::kIndependent;
  const bool correlated = mode == ConstructionMode::kCorrelated;
  const double k = tol.standard_errors;
  auto add = [&](std::string name, bool applicable, bool passed, std::string detail) {
    result.checks.push_back({std::move(name), applicable, passed, std::move(detail)});
  };
  auto fmt = [](double v) {
    std::ostringstream o;
    o.precision(6);
    o << v;
    return o.str();
  };

  const double best_endpoint = std::min(r.r_y, r.r_s);
  add("strict_improvement", !correlated,
      improvement.mean < -k * improvement.standard_error,
      correlated ? "not applicable (correlated)"
                 : "min_grid R = " + fmt(r.r_min_empirical) + " < min(R_y, R_s) - " + fmt(k) +
                       " SE = " + fmt(best_endpoint) + " - " +
                       fmt(k * improvement.standard_error));
  add("minimum_bound", independent,
      r.r_min_empirical <= r.r_min_predicted + k * at_min_estimate.standard_error,
      "min_grid R = " + fmt(r.r_min_empirical) + " <= R_min_predicted + " + fmt(k) +
          " SE = " + fmt(r.r_min_predicted) + " + " + fmt(k * at_min_estimate.standard_error));
  add("argmin_lambda", independent,
      std::abs(r.lambda_star_empirical - r.lambda_star_predicted) <= tol.lambda_tolerance,
      "|lambda_emp - lambda_pred| = |" + fmt(r.lambda_star_empirical) + " - " +
          fmt(r.lambda_star_predicted) + "| <= " + fmt(tol.lambda_tolerance));
  const double rel_min = r.r_min_predicted > 0.0
                             ? std::abs(r.r_min_empirical - r.r_min_predicted) / r.r_min_predicted
                             : std::abs(r.r_min_empirical);
  add("closed_form_minimum", independent, rel_min <= tol.relative_min_tolerance,
      "relative gap " + fmt(rel_min) + " <= " + fmt(tol.relative_min_tolerance));
  add("quadratic_fit", independent, r.fit_residual < tol.relative_fit_tolerance,
      "relative residual " + fmt(r.fit_residual) + " < " + fmt(tol.relative_fit_tolerance));
  add("cross_term", independent, std::abs(r.cross.mean) < k * r.cross.standard_error,
      "|cross| = " + fmt(std::abs(r.cross.mean)) + " < " + fmt(k) + " SE = " +
          fmt(k * r.cross.standard_error));
  return result;
}

SyntheticSources make_independent_sources(std::size_t n, std::size_t labels, double flip_rate,
                                          double sigma, std::size_t ensemble_size,
                                          std::uint64_t seed) {
  if (n == 0 || labels == 0) throw ParameterError("make_independent_sources: empty construction");
  if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) {
    throw ParameterError("make_independent_sources: flip rate outside [0,1]");
  }
  if (!(sigma >= 0.0)) throw ParameterError("make_independent_sources: sigma must be >= 0");

  std::mt19937_64 label_rng(seed);
  std::mt19937_64 flip_rng(seed ^ 0xA5A5A5A5DEADBEEFULL);
  std::mt19937_64 soft_rng(seed ^ 0x5DEECE66DULL);
  std::uniform_int_distribution<std::size_t> count_dist(1, std::min<std::size_t>(3, labels));
  std::uniform_int_distribution<std::size_t> label_dist(0, labels - 1);
  std::bernoulli_distribution flip(flip_rate);
  std::normal_distribution<double> noise(0.0, sigma);

  SyntheticSources out;
  out.truth = Matrix(n, labels);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = count_dist(label_rng);
    std::size_t placed = 0;
    while (placed < k) {
      const std::size_t m = label_dist(label_rng);
      if (out.truth(i, m) == 0.0) {
        out.truth(i, m) = 1.0;
        ++placed;
      }
    }
  }
  out.y = out.truth;
  for (double& v : out.y.data()) {
    if (flip(flip_rng)) v = 1.0 - v;
  }
  auto soft_source = [&] {
    Matrix s = out.truth;
    if (sigma > 0.0) {
      for (double& v : s.data()) v += noise(soft_rng);
    }
    return s;
  };
  out.s = soft_source();
  for (std::size_t k = 0; k < ensemble_size; ++k) out.ensemble.push_back(soft_source());
  return out;
}

}  // namespace noisy_distill
