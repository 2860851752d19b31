#pragma once

#include "xpasc/common.hpp"

#include <span>
#include <string>

namespace xpasc {

// Probability vector over K classes. Construction normalizes the input and
// lifts every entry to at least kProbabilityFloor, so KL divergence against
// it is always finite.
class PredictionDistribution {
 public:
  static constexpr double kProbabilityFloor = 1e-12;

  PredictionDistribution() = default;
  // Throws DimensionError on empty input and Error on negative, non-finite
  // or all-zero weights.
  explicit PredictionDistribution(const Eigen::VectorXd& weights);

  static PredictionDistribution uniform(int num_classes);

  const Eigen::VectorXd& probs() const { return probs_; }
  Eigen::Index size() const { return probs_.size(); }
  double operator[](Eigen::Index i) const { return probs_(i); }
  Eigen::Index argmax() const;

  bool operator==(const PredictionDistribution& o) const { return probs_ == o.probs_; }

 private:
  Eigen::VectorXd probs_;
};

// Numerically stable softmax.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

// A model that maps a token sequence to a class distribution. Implementations
// must be pure functions of their input once frozen, and must return the
// uniform distribution for an empty token sequence.
class PredictionOracle {
 public:
  virtual ~PredictionOracle() = default;
  virtual PredictionDistribution predict(std::span<const std::string> tokens) const = 0;
  virtual int num_classes() const = 0;
};

}  // namespace xpasc
