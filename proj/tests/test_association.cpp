#include "support/brute_force.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"
#include "xpasc/association.hpp"

#include <doctest.h>

#include <cmath>

using namespace xpasc;

namespace {

// Class A: 8 instances with "x", 2 with "y"; class B the other way round.
Corpus twenty_instance_corpus() {
  CorpusMeta meta{{"A", "B"}, {{"lfA", 0}, {"lfB", 1}}};
  std::vector<Instance> v;
  for (int i = 0; i < 20; ++i) {
    const int cls = i < 10 ? 0 : 1;
    const int k = i % 10;
    const bool x = cls == 0 ? k < 8 : k < 2;
    v.push_back({"i" + std::to_string(i), {x ? "x" : "y"}, cls, {cls}});
  }
  return Corpus(meta, v);
}

// Hand-set matrices over the single feature "f" with two classes and three LFs.
AssociationMatrices hand_matrices() {
  AssociationMatrices m;
  m.vocabulary = Vocabulary({"f"});
  m.class_assoc = Eigen::MatrixXd::Zero(2, 1);
  m.lf_assoc = Eigen::MatrixXd::Zero(3, 1);
  m.class_assoc(0, 0) = 0.5;
  m.lf_assoc(0, 0) = 0.2;
  m.lf_assoc(1, 0) = 0.4;
  m.lf_assoc(2, 0) = 0.5;
  return m;
}

}  // namespace

TEST_CASE("chi-square cell") {
  CHECK(chi_square_cell(8.0, 5.0) == doctest::Approx(1.8).epsilon(1e-12));
  CHECK(chi_square_cell(4.0, 4.0) == 0.0);
  CHECK(chi_square_cell(0.0, 2.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(chi_square_cell(3.0, 0.0) == 0.0);
}

TEST_CASE("PPMI cell") {
  // P(f,z), P(f), P(z) as counts over a total of 20.
  CHECK(ppmi_cell<double>(2, 4, 10, 20) == doctest::Approx(0.0));
  CHECK(ppmi_cell<double>(4, 4, 10, 20) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ppmi_cell<double>(4, 4, 10, 20) == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(ppmi_cell<double>(1, 4, 10, 20) == 0.0);
  CHECK(ppmi_cell<double>(0, 4, 10, 20) == 0.0);
  CHECK(std::isfinite(pmi_cell<double>(0, 4, 10, 20)));
}

TEST_CASE("NPMI cell") {
  CHECK(npmi_cell<double>(4, 4, 10, 20) == doctest::Approx(std::log(2.0) / -std::log(0.2)).epsilon(1e-12));
  CHECK(npmi_cell<double>(4, 4, 10, 20) == doctest::Approx(0.4307).epsilon(1e-4));
  CHECK(npmi_cell<double>(2, 4, 10, 20) == doctest::Approx(0.0));
  CHECK(npmi_cell<double>(7, 7, 7, 7) == 1.0);
}

TEST_CASE("twenty-instance chi-square fixture") {
  const Corpus c = twenty_instance_corpus();
  const auto m = build_association(c, AssociationMethod::chi2);
  const auto x = c.vocabulary().index_of("x");
  CHECK(m.class_assoc(0, x) == doctest::Approx(1.8).epsilon(1e-12));
  CHECK(m.class_assoc.rows() == 2);
  CHECK(m.lf_assoc.rows() == 2);
  CHECK(m.class_assoc.cols() == c.vocabulary().size());
}

TEST_CASE("independent feature and single class give zero chi-square") {
  CorpusMeta meta{{"A", "B"}, {{"l", 0}}};
  const Corpus ind(meta, {{"1", {"x"}, 0, {0}}, {"2", {"y"}, 0, {0}}, {"3", {"x"}, 1, {0}}, {"4", {"y"}, 1, {0}}});
  CHECK(build_association(ind, AssociationMethod::chi2).class_assoc.isZero(0.0));
  CHECK(build_association(ind, AssociationMethod::ppmi).class_assoc.isZero(0.0));

  CorpusMeta one{{"A"}, {{"l", 0}}};
  const Corpus single(one, {{"1", {"x", "y"}, 0, {0}}, {"2", {"x"}, 0, {0}}, {"3", {"z"}, 0, {0}}});
  CHECK(build_association(single, AssociationMethod::chi2).class_assoc.isZero(1e-15));
}

TEST_CASE("matrices agree with brute-force enumeration") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Corpus c = xpasc::testing::random_corpus(rng);
    const auto ct = xpasc::testing::brute_class_table(c);
    const auto lt = xpasc::testing::brute_lf_table(c);
    const auto chi = build_association(c, AssociationMethod::chi2);
    const auto ppmi = build_association(c, AssociationMethod::ppmi);
    const auto bc = xpasc::testing::brute_chi2(ct);
    const auto bl = xpasc::testing::brute_chi2(lt);
    const auto pc = xpasc::testing::brute_ppmi(ct);
    const auto pl = xpasc::testing::brute_ppmi(lt);
    for (Eigen::Index f = 0; f < c.vocabulary().size(); ++f) {
      for (int z = 0; z < c.num_classes(); ++z) {
        CHECK(std::abs(chi.class_assoc(z, f) - bc[z][f]) < 1e-10);
        CHECK(std::abs(ppmi.class_assoc(z, f) - pc[z][f]) < 1e-10);
      }
      for (int z = 0; z < c.num_lfs(); ++z) {
        CHECK(std::abs(chi.lf_assoc(z, f) - bl[z][f]) < 1e-10);
        CHECK(std::abs(ppmi.lf_assoc(z, f) - pl[z][f]) < 1e-10);
      }
    }
  }
}

TEST_CASE("entry ranges and duplication laws") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Corpus c = xpasc::testing::random_corpus(rng);
    const Corpus d = xpasc::testing::duplicated(c);
    const auto chi = build_association(c, AssociationMethod::chi2);
    const auto ppmi = build_association(c, AssociationMethod::ppmi);
    const auto npmi = build_association(c, AssociationMethod::npmi);
    CHECK((chi.class_assoc.array() >= 0).all());
    CHECK((chi.lf_assoc.array() >= 0).all());
    CHECK((ppmi.class_assoc.array() >= 0).all());
    CHECK((ppmi.lf_assoc.array() >= 0).all());
    CHECK((npmi.class_assoc.array() >= 0).all());
    CHECK((npmi.class_assoc.array() <= 1).all());
    CHECK((npmi.lf_assoc.array() >= 0).all());
    CHECK((npmi.lf_assoc.array() <= 1).all());

    const auto chi2x = build_association(d, AssociationMethod::chi2);
    CHECK((chi2x.class_assoc - 2 * chi.class_assoc).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((chi2x.lf_assoc - 2 * chi.lf_assoc).cwiseAbs().maxCoeff() < 1e-10);
    const auto ppmi2x = build_association(d, AssociationMethod::ppmi);
    CHECK((ppmi2x.class_assoc - ppmi.class_assoc).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ppmi2x.lf_assoc - ppmi.lf_assoc).cwiseAbs().maxCoeff() < 1e-12);
    const auto npmi2x = build_association(d, AssociationMethod::npmi);
    CHECK((npmi2x.class_assoc - npmi.class_assoc).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((npmi2x.lf_assoc - npmi.lf_assoc).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("association score") {
  const auto m = hand_matrices();
  CHECK(association_score(Instance{"i", {"f"}, 0, {0}}, "f", m) == doctest::Approx(0.3));
  CHECK(association_score(Instance{"i", {"f"}, 0, {0, 1}}, "f", m) == doctest::Approx(0.4));
  CHECK(association_score(Instance{"i", {"f"}, 0, {2}}, "f", m) == 0.0);
  CHECK_THROWS_AS(association_score(Instance{"i", {"g"}, 0, {0}}, "g", m), LookupError);
}

TEST_CASE("association sign follows dominance") {
  const Corpus c = xpasc::testing::planted_corpus({.instances = 400});
  const auto m = build_association(c, AssociationMethod::chi2);
  const Instance probe{"probe", {"awful", "bad"}, 0, {0}};
  CHECK(association_score(probe, "awful", m) < 0);
  CHECK(association_score(probe, "bad", m) > 0);
}

TEST_CASE("method names") {
  CHECK(parse_association_method("chi2") == AssociationMethod::chi2);
  CHECK(parse_association_method("npmi") == AssociationMethod::npmi);
  CHECK(to_string(AssociationMethod::ppmi) == "ppmi");
  CHECK_THROWS_AS(parse_association_method("tfidf"), ConfigError);
}

TEST_CASE("JSON round trip is exact") {
  const Corpus c = xpasc::testing::planted_corpus({.instances = 120});
  for (auto method : {AssociationMethod::chi2, AssociationMethod::ppmi, AssociationMethod::npmi}) {
    const auto m = build_association(c, method);
    const auto text = matrices_to_json(m);
    const auto back = matrices_from_json(text);
    CHECK(back.method == method);
    CHECK(back.class_assoc == m.class_assoc);
    CHECK(back.lf_assoc == m.lf_assoc);
    CHECK(back.vocabulary == m.vocabulary);
    CHECK(back.class_names == m.class_names);
    CHECK(back.lf_names == m.lf_names);
    CHECK(matrices_to_json(back) == text);
  }
  xpasc::testing::TempDir dir("assoc");
  const auto m = build_association(c, AssociationMethod::chi2);
  save_matrices(m, dir / "m.json");
  CHECK(load_matrices(dir / "m.json").class_assoc == m.class_assoc);
  CHECK_THROWS_AS(matrices_from_json("{\"method\": \"chi2\"}"), Error);
}
