#pragma once

#include "xpasc/common.hpp"
#include "xpasc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace xpasc {

enum class AssociationMethod { chi2, ppmi, npmi };

std::string_view to_string(AssociationMethod m);
// Throws ConfigError for anything other than "chi2", "ppmi" or "npmi".
AssociationMethod parse_association_method(std::string_view name);

// (observed - expected)^2 / expected, with a zero expectation defined as 0.
template <typename Scalar>
Scalar chi_square_cell(Scalar observed, Scalar expected) {
  if (!(expected > Scalar(0))) return Scalar(0);
  const Scalar d = observed - expected;
  return d * d / expected;
}

// ln(P(f,z) / (P(f) P(z))) from raw counts. Zero joint counts give 0, never -inf.
template <typename Scalar>
Scalar pmi_cell(Count joint, Count feature_total, Count label_total, Count grand_total) {
  if (joint <= 0 || feature_total <= 0 || label_total <= 0 || grand_total <= 0) return Scalar(0);
  const Scalar T = static_cast<Scalar>(grand_total);
  const Scalar p_joint = static_cast<Scalar>(joint) / T;
  const Scalar p_feature = static_cast<Scalar>(feature_total) / T;
  const Scalar p_label = static_cast<Scalar>(label_total) / T;
  return std::log(p_joint / (p_feature * p_label));
}

template <typename Scalar>
Scalar ppmi_cell(Count joint, Count feature_total, Count label_total, Count grand_total) {
  const Scalar pmi = pmi_cell<Scalar>(joint, feature_total, label_total, grand_total);
  return pmi > Scalar(0) ? pmi : Scalar(0);
}

// PMI divided by the joint self-information -ln P(f,z), clamped to [0, 1].
// A joint probability of 1 has zero self-information and maps to 1.
template <typename Scalar>
Scalar npmi_cell(Count joint, Count feature_total, Count label_total, Count grand_total) {
  if (joint <= 0 || grand_total <= 0) return Scalar(0);
  const Scalar p_joint = static_cast<Scalar>(joint) / static_cast<Scalar>(grand_total);
  const Scalar h = -std::log(p_joint);
  if (!(h > Scalar(0))) return Scalar(1);
  const Scalar v = pmi_cell<Scalar>(joint, feature_total, label_total, grand_total) / h;
  return std::clamp(v, Scalar(0), Scalar(1));
}

struct AssociationMatrices {
  AssociationMethod method = AssociationMethod::chi2;
  Eigen::MatrixXd class_assoc;  // K x V
  Eigen::MatrixXd lf_assoc;     // J x V
  std::vector<std::string> class_names;
  std::vector<std::string> lf_names;
  Vocabulary vocabulary;
};

AssociationMatrices build_chi2_matrices(const CountTables& counts);
AssociationMatrices build_ppmi_matrices(const CountTables& counts);
AssociationMatrices build_npmi_matrices(const CountTables& counts);

// Builds the matrices for `corpus` and attaches its class/LF names and vocabulary.
AssociationMatrices build_association(const Corpus& corpus, AssociationMethod method);
AssociationMatrices build_association(const Corpus& corpus, const CountTables& counts,
                                      AssociationMethod method);

// Sum over the instance's matching LFs of C[class][f] - L[lf][f]. The class
// term is repeated once per match.
double association_score(const Instance& instance, FeatureIndex feature,
                         const AssociationMatrices& matrices);
double association_score(const Instance& instance, std::string_view feature,
                         const AssociationMatrices& matrices);

// JSON container {"method", "classes", "lfs", "features", "C", "L"}; C and L
// are arrays of rows. Doubles are written in shortest round-trip form.
std::string matrices_to_json(const AssociationMatrices& m);
AssociationMatrices matrices_from_json(std::string_view text);
void save_matrices(const AssociationMatrices& m, const std::filesystem::path& path);
AssociationMatrices load_matrices(const std::filesystem::path& path);

}  // namespace xpasc
