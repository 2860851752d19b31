#include "xpasc/explainability.hpp"

#include <json.hpp>

#include <algorithm>

namespace xpasc {

PredictionDistribution::PredictionDistribution(const Eigen::VectorXd& weights) {
  if (weights.size() == 0) throw DimensionError("prediction distribution over zero classes");
  if (!weights.allFinite() || (weights.array() < 0.0).any()) {
    throw Error("prediction weights must be finite and non-negative");
  }
  const double total = weights.sum();
  if (!(total > 0.0)) throw Error("prediction weights sum to zero");
  probs_ = weights / total;
  if (probs_.minCoeff() < kProbabilityFloor) {
    // Mix with the floor so every entry is >= floor and the sum stays 1.
    const double k = static_cast<double>(probs_.size());
    probs_ = (probs_ * (1.0 - k * kProbabilityFloor)).array() + kProbabilityFloor;
  }
}

PredictionDistribution PredictionDistribution::uniform(int num_classes) {
  if (num_classes <= 0) throw DimensionError("uniform distribution over zero classes");
  return PredictionDistribution(Eigen::VectorXd::Ones(num_classes));
}

Eigen::Index PredictionDistribution::argmax() const {
  Eigen::Index best = 0;
  probs_.maxCoeff(&best);
  return best;
}

Occlusion occlude(const Instance& instance, std::string_view feature) {
  Occlusion out{instance, false};
  auto& tokens = out.instance.tokens;
  const auto before = tokens.size();
  std::erase_if(tokens, [&](const std::string& t) { return t == feature; });
  if (tokens.size() == before) {
    throw LookupError("feature '" + std::string(feature) + "' does not occur in instance '" +
                      instance.id + "'");
  }
  out.degenerate = tokens.empty();
  return out;
}

double explainability_score(const PredictionOracle& oracle, const Instance& instance,
                            std::string_view feature) {
  const auto full = oracle.predict(instance.tokens);
  const auto occluded = occlude(instance, feature);
  return kl_divergence(full, oracle.predict(occluded.instance.tokens));
}

ExplainabilityMap instance_explainability(const PredictionOracle& oracle, const Instance& instance,
                                          const Vocabulary& vocab) {
  if (instance.tokens.empty()) throw Error("instance '" + instance.id + "' has no tokens");
  ExplainabilityMap map;
  map.instance_id = instance.id;
  const auto full = oracle.predict(instance.tokens);
  for (FeatureIndex f : distinct_features(instance, vocab)) {
    const auto occluded = occlude(instance, vocab.feature(f));
    map.scores.emplace(f, kl_divergence(full, oracle.predict(occluded.instance.tokens)));
  }
  return map;
}

ExplainabilityMap normalize_map(ExplainabilityMap map) {
  if (map.normalized) return map;
  double max_value = 0.0;
  for (const auto& [f, v] : map.scores) max_value = std::max(max_value, v);
  if (max_value > 0.0) {
    for (auto& [f, v] : map.scores) v /= max_value;
  }
  map.normalized = true;
  return map;
}

std::string explainability_to_jsonl(const ExplainabilityMap& map, const Vocabulary& vocab) {
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& [f, v] : map.scores) scores[vocab.feature(f)] = v;
  nlohmann::json j{{"id", map.instance_id}, {"scores", scores}, {"normalized", map.normalized}};
  return j.dump();
}

}  // namespace xpasc
