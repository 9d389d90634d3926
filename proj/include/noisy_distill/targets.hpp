#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "noisy_distill/numerics.hpp"

namespace noisy_distill {

class MLPClassifier;

// Supplies the [0,1]^L training target for each row of the training feature
// matrix. Plain noisy training, distillation, guided distillation, smoothing
// and bootstrapping differ only in the provider.
class TargetProvider {
 public:
  virtual ~TargetProvider() = default;

  virtual std::size_t size() const = 0;
  virtual std::size_t label_count() const = 0;
  virtual std::span<const double> target(std::size_t row) const = 0;

  // Called once before every epoch, single-threaded. Providers whose targets
  // depend on the model being trained refresh here.
  virtual void on_epoch_begin(const MLPClassifier& /*model*/, const Matrix& /*features*/) {}
};

// Fixed targets, one row per training sample.
class StaticTargets final : public TargetProvider {
 public:
  explicit StaticTargets(Matrix targets) : targets_(std::move(targets)) {}

  std::size_t size() const override { return targets_.rows(); }
  std::size_t label_count() const override { return targets_.cols(); }
  std::span<const double> target(std::size_t row) const override { return targets_.row(row); }

  const Matrix& matrix() const noexcept { return targets_; }

 private:
  Matrix targets_;
};

}  // namespace noisy_distill
