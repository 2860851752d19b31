#include "xpasc/score.hpp"

#include "xpasc/explainability.hpp"

#include <json.hpp>

#include <cmath>

namespace xpasc {

using nlohmann::json;

namespace {

void check_gamma(double gamma) {
  if (!std::isfinite(gamma) || gamma < 0.0) {
    throw ConfigError("gamma must be finite and >= 0, got " + std::to_string(gamma));
  }
}

void check_vocabulary(const Corpus& corpus, const Vocabulary& other, const char* what) {
  if (corpus.vocabulary().digest() != other.digest()) {
    throw ConfigError(std::string("vocabulary mismatch between corpus (") +
                      corpus.vocabulary().digest() + ") and " + what + " (" + other.digest() + ")");
  }
}

void check_shapes(const Corpus& corpus, const AssociationMatrices& m) {
  if (m.class_assoc.rows() != corpus.num_classes() || m.lf_assoc.rows() != corpus.num_lfs() ||
      m.class_assoc.cols() != corpus.vocabulary().size() || m.lf_assoc.cols() != corpus.vocabulary().size()) {
    throw ConfigError("association matrix shapes do not match the corpus");
  }
}

void finalize(XpascReport& r) {
  double sum = 0.0;
  std::size_t terms = 0;
  for (const auto& inst : r.instances) {
    for (const auto& t : inst.terms) {
      sum += t.product;
      ++terms;
    }
  }
  r.num_instances = r.instances.size();
  r.num_terms = terms;
  r.score = terms == 0 ? 1.0 : 1.0 + sum / static_cast<double>(terms);
}

}  // namespace

XpascReport xpasc(const Corpus& corpus, const PredictionOracle& oracle,
                  const AssociationMatrices& matrices, double gamma, ReportTags tags) {
  check_gamma(gamma);
  check_vocabulary(corpus, matrices.vocabulary, "association matrices");
  check_shapes(corpus, matrices);
  XpascReport r;
  r.method = matrices.method;
  r.gamma = gamma;
  r.model_id = std::move(tags.model_id);
  r.seed = tags.seed;
  r.instances.reserve(corpus.size());
  for (const auto& inst : corpus.instances()) {
    const auto map = instance_explainability(oracle, inst, corpus.vocabulary());
    InstanceBreakdown b{inst.id, {}};
    b.terms.reserve(map.scores.size());
    for (const auto& [f, sxp] : map.scores) {
      const double sasc = association_score(inst, f, matrices);
      b.terms.push_back({f, sxp, sasc, std::pow(sxp, gamma) * sasc});
    }
    r.instances.push_back(std::move(b));
  }
  finalize(r);
  return r;
}

std::vector<double> minmax_scale(std::span<const double> values) {
  const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
  const Eigen::VectorXd s = minmax_scale(v);
  return {s.data(), s.data() + s.size()};
}

XpascReport xpasc_scaled(const Corpus& corpus, const PredictionOracle& oracle,
                         const CountTables& counts, double gamma, ReportTags tags) {
  check_gamma(gamma);
  const auto matrices = build_association(corpus, counts, AssociationMethod::npmi);
  check_shapes(corpus, matrices);
  XpascReport r;
  r.method = AssociationMethod::npmi;
  r.gamma = gamma;
  r.scaled = true;
  r.model_id = std::move(tags.model_id);
  r.seed = tags.seed;

  std::vector<double> xp_pool;
  std::vector<double> asc_pool;
  for (const auto& inst : corpus.instances()) {
    const auto map = normalize_map(instance_explainability(oracle, inst, corpus.vocabulary()));
    InstanceBreakdown b{inst.id, {}};
    for (const auto& [f, sxp] : map.scores) {
      const double sasc = association_score(inst, f, matrices);
      b.terms.push_back({f, sxp, sasc, 0.0});
      xp_pool.push_back(sxp);
      asc_pool.push_back(sasc);
    }
    r.instances.push_back(std::move(b));
  }
  if (!xp_pool.empty()) {
    const auto xp = minmax_scale(xp_pool);
    const auto asc = minmax_scale(asc_pool);
    std::size_t k = 0;
    for (auto& inst : r.instances) {
      for (auto& t : inst.terms) {
        t.explainability = xp[k];
        t.association = asc[k];
        t.product = std::pow(t.explainability, gamma) * t.association;
        ++k;
      }
    }
  }
  finalize(r);
  return r;
}

std::string report_to_json(const XpascReport& r, const Vocabulary& vocab) {
  json j;
  j["score"] = r.score;
  j["method"] = std::string(to_string(r.method));
  j["gamma"] = r.gamma;
  j["scaled"] = r.scaled;
  j["N"] = r.num_instances;
  j["M_total"] = r.num_terms;
  j["model_id"] = r.model_id;
  j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
  json instances = json::array();
  for (const auto& inst : r.instances) {
    json terms = json::array();
    for (const auto& t : inst.terms) {
      terms.push_back({{"feature", vocab.feature(t.feature)},
                       {"s_xp", t.explainability},
                       {"s_asc", t.association},
                       {"product", t.product}});
    }
    instances.push_back({{"id", inst.id}, {"terms", std::move(terms)}});
  }
  j["instances"] = std::move(instances);
  return j.dump(1);
}

// --- shift analysis ----------------------------------------------------------

std::string_view to_string(ShiftKind k) {
  switch (k) {
    case ShiftKind::none: return "none";
    case ShiftKind::off_lf: return "off-LF";
    case ShiftKind::to_class: return "to-class";
  }
  return "unknown";
}

FeatureIndex top_feature(const ExplainabilityMap& map) {
  if (map.scores.empty()) throw Error("explainability map of '" + map.instance_id + "' is empty");
  auto best = map.scores.begin();
  for (auto it = map.scores.begin(); it != map.scores.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

namespace {

enum class Dominance { lf, cls, neither };

Dominance dominance(const Instance& inst, FeatureIndex f, const AssociationMatrices& m) {
  const double c = m.class_assoc(inst.weak_label, f);
  double max_l = -std::numeric_limits<double>::infinity();
  for (LfIndex l : inst.lf_matches) max_l = std::max(max_l, m.lf_assoc(l, f));
  if (max_l > c) return Dominance::lf;
  if (c > max_l) return Dominance::cls;
  return Dominance::neither;
}

}  // namespace

ShiftReport shift_analysis(const Corpus& corpus, const PredictionOracle& oracle_a,
                           const PredictionOracle& oracle_b, const AssociationMatrices& matrices) {
  check_vocabulary(corpus, matrices.vocabulary, "association matrices");
  check_shapes(corpus, matrices);
  ShiftReport r;
  r.records.reserve(corpus.size());
  for (const auto& inst : corpus.instances()) {
    if (inst.lf_matches.empty()) throw ConfigError("instance '" + inst.id + "' has no LF match");
    ShiftRecord rec;
    rec.id = inst.id;
    rec.top_feature_a = top_feature(instance_explainability(oracle_a, inst, corpus.vocabulary()));
    rec.top_feature_b = top_feature(instance_explainability(oracle_b, inst, corpus.vocabulary()));
    if (dominance(inst, rec.top_feature_a, matrices) == Dominance::lf) {
      switch (dominance(inst, rec.top_feature_b, matrices)) {
        case Dominance::cls: rec.kind = ShiftKind::to_class; break;
        case Dominance::neither: rec.kind = ShiftKind::off_lf; break;
        case Dominance::lf: rec.kind = ShiftKind::none; break;
      }
    }
    switch (rec.kind) {
      case ShiftKind::none: ++r.none; break;
      case ShiftKind::off_lf: ++r.off_lf; break;
      case ShiftKind::to_class: ++r.to_class; break;
    }
    r.records.push_back(std::move(rec));
  }
  return r;
}

std::string shift_report_to_json(const ShiftReport& r, const Vocabulary& vocab) {
  json records = json::array();
  for (const auto& rec : r.records) {
    records.push_back({{"id", rec.id},
                       {"top_feature_a", vocab.feature(rec.top_feature_a)},
                       {"top_feature_b", vocab.feature(rec.top_feature_b)},
                       {"shift", std::string(to_string(rec.kind))}});
  }
  json j;
  j["counts"] = {{"none", r.none}, {"off-LF", r.off_lf}, {"to-class", r.to_class}};
  j["records"] = std::move(records);
  return j.dump(1);
}

}  // namespace xpasc
