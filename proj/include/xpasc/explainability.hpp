#pragma once

#include "xpasc/common.hpp"
#include "xpasc/corpus.hpp"
#include "xpasc/oracle.hpp"

#include <cmath>
#include <map>
#include <string>
#include <string_view>

namespace xpasc {

// D_KL(P || Q) = sum_x P(x) ln(P(x) / Q(x)) in nats. Terms with P(x) = 0
// contribute nothing. Rounding below zero is clamped, the upper end is not
// bounded.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p,
                                        const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedP::Scalar;
  if (p.size() != q.size()) {
    throw DimensionError("kl_divergence: distributions have " + std::to_string(p.size()) +
                         " and " + std::to_string(q.size()) + " entries");
  }
  Scalar sum(0);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar pi = p.derived().coeff(i);
    if (pi > Scalar(0)) sum += pi * std::log(pi / q.derived().coeff(i));
  }
  return sum > Scalar(0) ? sum : Scalar(0);
}

inline double kl_divergence(const PredictionDistribution& p, const PredictionDistribution& q) {
  return kl_divergence(p.probs(), q.probs());
}

struct Occlusion {
  Instance instance;
  // Every token was the occluded feature; the oracle sees an empty input.
  bool degenerate = false;
};

// Removes every token equal to `feature`. Throws LookupError if the feature
// does not occur in the instance.
Occlusion occlude(const Instance& instance, std::string_view feature);

// D_KL(prediction on the full instance || prediction with `feature` removed).
double explainability_score(const PredictionOracle& oracle, const Instance& instance,
                            std::string_view feature);

struct ExplainabilityMap {
  std::string instance_id;
  std::map<FeatureIndex, double> scores;
  bool normalized = false;
};

// One oracle call for the full instance and one per distinct feature type.
ExplainabilityMap instance_explainability(const PredictionOracle& oracle, const Instance& instance,
                                          const Vocabulary& vocab);

// Divides every entry by the per-instance maximum. All-zero maps only get
// the flag set. Already normalized maps pass through unchanged.
ExplainabilityMap normalize_map(ExplainabilityMap map);

// {"id": str, "scores": {feature: float}, "normalized": bool}
std::string explainability_to_jsonl(const ExplainabilityMap& map, const Vocabulary& vocab);

}  // namespace xpasc
