#pragma once

#include "xpasc/association.hpp"
#include "xpasc/common.hpp"
#include "xpasc/corpus.hpp"
#include "xpasc/explainability.hpp"
#include "xpasc/models.hpp"
#include "xpasc/oracle.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace xpasc {

struct FeatureTerm {
  FeatureIndex feature = 0;
  double explainability = 0.0;
  double association = 0.0;
  double product = 0.0;
};

struct InstanceBreakdown {
  std::string id;
  std::vector<FeatureTerm> terms;  // ascending feature index
};

struct XpascReport {
  double score = 1.0;
  AssociationMethod method = AssociationMethod::chi2;
  double gamma = 1.0;
  bool scaled = false;
  std::size_t num_instances = 0;
  // Number of summed (instance, distinct feature) pairs; the score is
  // 1 + (sum of products) / num_terms.
  std::size_t num_terms = 0;
  std::string model_id;
  std::optional<std::uint64_t> seed;
  std::vector<InstanceBreakdown> instances;
};

struct ReportTags {
  std::string model_id;
  std::optional<std::uint64_t> seed;
};

// 1 + mean over every (instance, distinct feature) pair of
// S_xp(i,f)^gamma * S_asc(i,f). gamma must be finite and >= 0. Throws
// ConfigError when the matrices were built over a different vocabulary.
XpascReport xpasc(const Corpus& corpus, const PredictionOracle& oracle,
                  const AssociationMatrices& matrices, double gamma = 1.0, ReportTags tags = {});

// Affine map onto [0, 1]; a constant sequence maps to zeros.
template <typename Derived>
VectorX<typename Derived::Scalar> minmax_scale(const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  if (values.size() == 0) throw DimensionError("minmax_scale of an empty sequence");
  const Scalar lo = values.minCoeff();
  const Scalar range = values.maxCoeff() - lo;
  if (!(range > Scalar(0))) return VectorX<Scalar>::Zero(values.size());
  return ((values.array() - lo) / range).matrix();
}

std::vector<double> minmax_scale(std::span<const double> values);

// Normalized variant: NPMI association, per-instance max-normalized
// explainability, then MinMax over the pooled explainability values and the
// pooled association values across the corpus. Stored components are the
// scaled ones, all in [0, 1].
XpascReport xpasc_scaled(const Corpus& corpus, const PredictionOracle& oracle,
                         const CountTables& counts, double gamma = 1.0, ReportTags tags = {});

std::string report_to_json(const XpascReport& report, const Vocabulary& vocab);

// --- feature shift -----------------------------------------------------------
//
// A feature is LF-dominant for an instance when its largest L association over
// the instance's matching LFs exceeds its C association for the instance's
// weak class, and class-dominant when the C association is strictly larger.
// For the argmax-explainability features a (model A) and b (model B):
//   to-class : a is LF-dominant and b is class-dominant
//   off-LF   : a is LF-dominant and b is neither
//   none     : otherwise
enum class ShiftKind { none, off_lf, to_class };

std::string_view to_string(ShiftKind k);

struct ShiftRecord {
  std::string id;
  FeatureIndex top_feature_a = 0;
  FeatureIndex top_feature_b = 0;
  ShiftKind kind = ShiftKind::none;
};

struct ShiftReport {
  std::vector<ShiftRecord> records;
  std::size_t none = 0;
  std::size_t off_lf = 0;
  std::size_t to_class = 0;
};

// Lowest feature index wins explainability ties.
FeatureIndex top_feature(const ExplainabilityMap& map);

ShiftReport shift_analysis(const Corpus& corpus, const PredictionOracle& oracle_a,
                           const PredictionOracle& oracle_b, const AssociationMatrices& matrices);

std::string shift_report_to_json(const ShiftReport& report, const Vocabulary& vocab);

// --- lambda sweep ------------------------------------------------------------

struct SweepCell {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> xpasc;
  std::optional<double> task_metric;
  std::optional<std::string> error;  // set iff the cell failed
};

struct LambdaSummary {
  double lambda = 0.0;
  std::size_t succeeded = 0;
  std::optional<double> mean_xpasc;
  std::optional<double> mean_task_metric;
};

struct SweepReport {
  AssociationMethod method = AssociationMethod::chi2;
  std::vector<SweepCell> cells;  // lambda-major, in request order
  std::vector<LambdaSummary> per_lambda;
  // Spearman rank correlation between lambda and mean XPASC; absent with
  // fewer than two lambdas that have a mean, or with constant ranks.
  std::optional<double> spearman;
};

// Average ranks for ties.
std::vector<double> average_ranks(std::span<const double> values);
std::optional<double> spearman_correlation(std::span<const double> x, std::span<const double> y);

// Trains one adversarial model per (lambda, seed) cell from `base` and scores
// it with XPASC (gamma 1). A failing cell is recorded and the sweep goes on.
// Cells run on up to `threads` workers; the report is identical for any
// thread count.
SweepReport lambda_sweep(const Corpus& corpus, std::span<const double> lambdas,
                         std::span<const std::uint64_t> seeds, const TrainConfig& base,
                         AssociationMethod method, unsigned threads = 1);

// CSV columns: lambda,seed,xpasc,task_metric (failed cells carry nan).
std::string sweep_to_csv(const SweepReport& report);
std::string sweep_summary_to_json(const SweepReport& report);

}  // namespace xpasc
