#pragma once

// Empirical l2-risk analysis of label sources against known truth: risk of a
// candidate label, the risk curve of the blend lambda*y + (1-lambda)*s, its
// closed-form optimum, the independence cross-term, the uniform-prior
// comparison, and the bias/variance split of an ensemble of soft predictors.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "noisy_distill/numerics.hpp"

namespace noisy_distill {

// A mean with its Monte-Carlo standard error (sample sd / sqrt(n)).
struct Estimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

// mean_i ||candidate_i - truth_i||^2. Rows are samples. Throws DataError when
// empty, DimensionError on shape mismatch.
double risk(const Matrix& candidate, const Matrix& truth);
Estimate risk_estimate(const Matrix& candidate, const Matrix& truth);

struct OptimalLambda {
  double lambda = 0.0;
  double min_risk = 0.0;
};

// lambda* = R_s / (R_s + R_y), min risk = R_y R_s / (R_y + R_s).
OptimalLambda optimal_lambda(double r_y, double r_s);
// Same optimum for lambda*y + (1-lambda)*u: lambda* = R_u/(R_u+R_y).
OptimalLambda smoothing_risk(double r_y, double r_u);

// Risk of the constant vector u = 1/L against truth.
double uniform_risk(const Matrix& truth);

// mean_i (y_i - t_i).(s_i - t_i)
Estimate cross_term(const Matrix& y, const Matrix& s, const Matrix& truth);

struct CurvePoint {
  double lambda = 0.0;
  double risk = 0.0;
};

struct RiskCurve {
  std::vector<CurvePoint> points;
  double r_y = 0.0;
  double r_s = 0.0;
  // ||R(lambda) - (lambda^2 R_y + (1-lambda)^2 R_s)||_2 / ||R(lambda)||_2 over
  // the grid; zero exactly when the cross-term vanishes.
  double fit_residual = 0.0;
  std::size_t argmin = 0;
};

// Evaluates the blend risk at every grid point. The blend is formed exactly as
// the training pseudo label is, so lambda = 1 reproduces risk(y) and lambda = 0
// reproduces risk(s) bit for bit.
RiskCurve risk_curve(const Matrix& y, const Matrix& s, const Matrix& truth,
                     const std::vector<double>& lambda_grid);

// `points` equispaced values covering [0, 1].
std::vector<double> lambda_grid(std::size_t points = 101);

struct BiasVariance {
  double bias = 0.0;
  double variance = 0.0;
};

// predictions[k] holds model k's outputs for the rows of truth. The main
// prediction is the per-element mean over models; bias = mean ||s_bar - t||^2,
// variance = mean over models of mean ||s_k - s_bar||^2. Needs >= 2 models.
BiasVariance bias_variance(const std::vector<Matrix>& predictions, const Matrix& truth);

struct RiskReport {
  double r_y = 0.0;
  double r_s = 0.0;
  double r_u = 0.0;
  Estimate cross;
  std::vector<CurvePoint> curve;
  double fit_residual = 0.0;
  double lambda_star_predicted = 0.0;
  double r_min_predicted = 0.0;
  double lambda_star_empirical = 0.0;
  double r_min_empirical = 0.0;
  // Paired standard error of R(lambda_emp) - min(R_y, R_s).
  double improvement_standard_error = 0.0;
  double bias = 0.0;
  double variance = 0.0;
};

nlohmann::json to_json(const RiskReport& report);
std::string curve_csv(const std::vector<CurvePoint>& curve);

enum class ConstructionMode { kIndependent, kCorrelated, kTrainedAuxiliary };

std::string to_string(ConstructionMode mode);
ConstructionMode parse_construction_mode(const std::string& name);

struct CheckResult {
  std::string name;
  bool applicable = true;
  bool passed = true;
  std::string detail;
};

struct Prop1Tolerances {
  double standard_errors = 3.0;
  double lambda_tolerance = 0.05;
  double relative_min_tolerance = 0.02;
  double relative_fit_tolerance = 0.02;
};

struct Prop1Result {
  RiskReport report;
  std::vector<CheckResult> checks;

  bool all_passed() const;
};

// Builds the report for the given sources and evaluates the optimum-risk
// checks. `ensemble` (optional, >= 2 entries) feeds the bias/variance terms.
//
// Which checks apply depends on how the sources were built:
//   independent  all checks (strict improvement, argmin, closed-form minimum,
//                quadratic fit, vanishing cross-term)
//   trained      strict improvement only; the rest are reported
//   correlated   none; s == y makes the curve flat
Prop1Result verify_blend_risk(const Matrix& y, const Matrix& s, const Matrix& truth,
                              const std::vector<double>& grid, const Prop1Tolerances& tol,
                              ConstructionMode mode, const std::vector<Matrix>& ensemble = {});

// Synthetic sources with known construction: truth has 1-3 positives out of
// `labels`; y flips each coordinate independently with probability
// `flip_rate`; every soft source is truth + N(0, sigma^2) per coordinate.
struct SyntheticSources {
  Matrix truth;
  Matrix y;
  Matrix s;
  std::vector<Matrix> ensemble;
};

SyntheticSources make_independent_sources(std::size_t n, std::size_t labels, double flip_rate,
                                          double sigma, std::size_t ensemble_size,
                                          std::uint64_t seed);

}  // namespace noisy_distill
