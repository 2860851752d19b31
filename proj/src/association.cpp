#include "xpasc/association.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace xpasc {

using nlohmann::json;

std::string_view to_string(AssociationMethod m) {
  switch (m) {
    case AssociationMethod::chi2: return "chi2";
    case AssociationMethod::ppmi: return "ppmi";
    case AssociationMethod::npmi: return "npmi";
  }
  return "unknown";
}

AssociationMethod parse_association_method(std::string_view name) {
  if (name == "chi2") return AssociationMethod::chi2;
  if (name == "ppmi") return AssociationMethod::ppmi;
  if (name == "npmi") return AssociationMethod::npmi;
  throw ConfigError("unknown association method '" + std::string(name) +
                    "' (expected chi2, ppmi or npmi)");
}

namespace {

// Transposed cell map: table is V x Z, result is Z x V.
template <typename CellFn>
Eigen::MatrixXd association_table(const CountMatrix& table, const CountVector& feature_marginal,
                                  const CountVector& label_marginal, Count total, CellFn cell) {
  Eigen::MatrixXd out(table.cols(), table.rows());
  for (Eigen::Index f = 0; f < table.rows(); ++f) {
    for (Eigen::Index z = 0; z < table.cols(); ++z) {
      out(z, f) = cell(table(f, z), feature_marginal(f), label_marginal(z), total);
    }
  }
  return out;
}

double chi2_from_counts(Count observed, Count feature_total, Count label_total, Count total) {
  if (total <= 0) return 0.0;
  const double expected =
      static_cast<double>(label_total) * static_cast<double>(feature_total) / static_cast<double>(total);
  return chi_square_cell(static_cast<double>(observed), expected);
}

template <typename CellFn>
AssociationMatrices build_with(const CountTables& c, AssociationMethod method, CellFn cell) {
  AssociationMatrices m;
  m.method = method;
  m.class_assoc = association_table(c.feature_class, c.feature_class_marginal, c.class_marginal,
                                    c.class_total, cell);
  m.lf_assoc =
      association_table(c.feature_lf, c.feature_lf_marginal, c.lf_marginal, c.lf_total, cell);
  return m;
}

}  // namespace

AssociationMatrices build_chi2_matrices(const CountTables& counts) {
  return build_with(counts, AssociationMethod::chi2, chi2_from_counts);
}

AssociationMatrices build_ppmi_matrices(const CountTables& counts) {
  return build_with(counts, AssociationMethod::ppmi, ppmi_cell<double>);
}

AssociationMatrices build_npmi_matrices(const CountTables& counts) {
  return build_with(counts, AssociationMethod::npmi, npmi_cell<double>);
}

AssociationMatrices build_association(const Corpus& corpus, const CountTables& counts,
                                      AssociationMethod method) {
  AssociationMatrices m;
  switch (method) {
    case AssociationMethod::chi2: m = build_chi2_matrices(counts); break;
    case AssociationMethod::ppmi: m = build_ppmi_matrices(counts); break;
    case AssociationMethod::npmi: m = build_npmi_matrices(counts); break;
  }
  m.class_names = corpus.meta().class_names;
  for (const auto& lf : corpus.meta().lfs) m.lf_names.push_back(lf.name);
  m.vocabulary = corpus.vocabulary();
  return m;
}

AssociationMatrices build_association(const Corpus& corpus, AssociationMethod method) {
  return build_association(corpus, count_cooccurrences(corpus), method);
}

double association_score(const Instance& instance, FeatureIndex feature,
                         const AssociationMatrices& matrices) {
  if (feature < 0 || feature >= matrices.class_assoc.cols()) {
    throw LookupError("feature index " + std::to_string(feature) + " outside the association matrices");
  }
  if (instance.weak_label < 0 || instance.weak_label >= matrices.class_assoc.rows()) {
    throw LookupError("class " + std::to_string(instance.weak_label) + " outside the association matrices");
  }
  const double class_term = matrices.class_assoc(instance.weak_label, feature);
  double s = 0.0;
  for (LfIndex l : instance.lf_matches) {
    if (l < 0 || l >= matrices.lf_assoc.rows()) {
      throw LookupError("labeling function " + std::to_string(l) + " outside the association matrices");
    }
    s += class_term - matrices.lf_assoc(l, feature);
  }
  return s;
}

double association_score(const Instance& instance, std::string_view feature,
                         const AssociationMatrices& matrices) {
  return association_score(instance, matrices.vocabulary.index_of(feature), matrices);
}

// --- serialization ---------------------------------------------------------

namespace {

json rows_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd rows_from_json(const json& rows, Eigen::Index expected_rows, Eigen::Index cols,
                               const char* name) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != expected_rows) {
    throw LoadError(std::string("matrix '") + name + "' has the wrong number of rows");
  }
  Eigen::MatrixXd m(expected_rows, cols);
  for (Eigen::Index r = 0; r < expected_rows; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw LoadError(std::string("matrix '") + name + "' row " + std::to_string(r) +
                      " has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

std::string matrices_to_json(const AssociationMatrices& m) {
  json j;
  j["method"] = std::string(to_string(m.method));
  j["classes"] = m.class_names;
  j["lfs"] = m.lf_names;
  j["features"] = m.vocabulary.features();
  j["vocabulary_digest"] = m.vocabulary.digest();
  j["C"] = rows_to_json(m.class_assoc);
  j["L"] = rows_to_json(m.lf_assoc);
  return j.dump(1);
}

AssociationMatrices matrices_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
    AssociationMatrices m;
    m.method = parse_association_method(j.at("method").get<std::string>());
    m.class_names = j.at("classes").get<std::vector<std::string>>();
    m.lf_names = j.at("lfs").get<std::vector<std::string>>();
    m.vocabulary = Vocabulary(j.at("features").get<std::vector<std::string>>());
    const auto V = m.vocabulary.size();
    m.class_assoc = rows_from_json(j.at("C"), static_cast<Eigen::Index>(m.class_names.size()), V, "C");
    m.lf_assoc = rows_from_json(j.at("L"), static_cast<Eigen::Index>(m.lf_names.size()), V, "L");
    return m;
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed association matrices: ") + e.what());
  }
}

void save_matrices(const AssociationMatrices& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << matrices_to_json(m) << '\n';
}

AssociationMatrices load_matrices(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return matrices_from_json(ss.str());
}

}  // namespace xpasc
