#include "support/synthetic.hpp"
#include "xpasc/score.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace xpasc;

namespace {

// Leans towards class 0 by `strength` for every occurrence of `key`.
class KeyOracle final : public PredictionOracle {
 public:
  KeyOracle(std::string key, double strength) : key_(std::move(key)), strength_(strength) {}
  PredictionDistribution predict(std::span<const std::string> tokens) const override {
    if (tokens.empty()) return PredictionDistribution::uniform(2);
    const bool hit = std::find(tokens.begin(), tokens.end(), key_) != tokens.end();
    Eigen::VectorXd p(2);
    p << (hit ? 0.5 + strength_ : 0.5), (hit ? 0.5 - strength_ : 0.5);
    return PredictionDistribution(p);
  }
  int num_classes() const override { return 2; }

 private:
  std::string key_;
  double strength_;
};

BowSoftmaxModel random_bow(const Corpus& corpus, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.5);
  Eigen::MatrixXd w(corpus.num_classes(), corpus.vocabulary().size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
  Eigen::VectorXd b(corpus.num_classes());
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = n(rng);
  return BowSoftmaxModel(corpus.vocabulary(), w, b);
}

AssociationMatrices zero_matrices(const Corpus& corpus) {
  AssociationMatrices m;
  m.vocabulary = corpus.vocabulary();
  m.class_assoc = Eigen::MatrixXd::Zero(corpus.num_classes(), corpus.vocabulary().size());
  m.lf_assoc = Eigen::MatrixXd::Zero(corpus.num_lfs(), corpus.vocabulary().size());
  return m;
}

// p = (q, 1 - q) with KL(p || uniform) = target, q in [0.5, 1).
double lean_for_kl(double target) {
  double lo = 0.5, hi = 1.0 - 1e-15;
  for (int i = 0; i < 200; ++i) {
    const double q = 0.5 * (lo + hi);
    const double kl = q * std::log(2 * q) + (1 - q) * std::log(2 * (1 - q));
    (kl < target ? lo : hi) = q;
  }
  return 0.5 * (lo + hi);
}

// Two features: "t" strongly tied to the LF, "c" to the class, "n" to neither.
struct ShiftFixture {
  Corpus corpus{CorpusMeta{{"A", "B"}, {{"l0", 0}}}, {{"i", {"c", "n", "t"}, 0, {0}}}};
  AssociationMatrices matrices = [this] {
    AssociationMatrices m = zero_matrices(corpus);
    const auto& v = corpus.vocabulary();
    m.class_assoc(0, v.index_of("c")) = 1.0;
    m.lf_assoc(0, v.index_of("t")) = 1.0;
    m.class_assoc(0, v.index_of("n")) = 0.5;
    m.lf_assoc(0, v.index_of("n")) = 0.5;
    return m;
  }();
};

}  // namespace

TEST_CASE("all-zero matrices score exactly one") {
  const Corpus corpus = xpasc::testing::planted_corpus({.instances = 50});
  std::mt19937_64 rng(1);
  const auto oracle = random_bow(corpus, rng);
  for (double gamma : {0.0, 0.5, 1.0, 3.0}) {
    CHECK(xpasc::xpasc(corpus, oracle, zero_matrices(corpus), gamma).score == 1.0);
  }
}

TEST_CASE("one instance, one feature") {
  const Corpus corpus(CorpusMeta{{"A", "B"}, {{"l0", 0}}}, {{"i", {"f"}, 0, {0}}});
  AssociationMatrices m = zero_matrices(corpus);
  m.class_assoc(0, 0) = 0.5;
  m.lf_assoc(0, 0) = 0.3;
  const KeyOracle oracle("f", lean_for_kl(0.5) - 0.5);
  const auto r = xpasc::xpasc(corpus, oracle, m, 1.0);
  REQUIRE(r.instances.size() == 1);
  CHECK(r.instances[0].terms[0].explainability == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.instances[0].terms[0].association == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(r.score == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(r.num_terms == 1);
}

TEST_CASE("gamma zero reduces products to the association") {
  const Corpus corpus = xpasc::testing::planted_corpus({.instances = 60});
  std::mt19937_64 rng(2);
  const auto oracle = random_bow(corpus, rng);
  const auto m = build_association(corpus, AssociationMethod::chi2);
  const auto r = xpasc::xpasc(corpus, oracle, m, 0.0);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& inst : r.instances) {
    for (const auto& t : inst.terms) {
      REQUIRE(t.explainability > 0.0);
      sum += t.association;
      ++n;
    }
  }
  CHECK(r.score == doctest::Approx(1.0 + sum / static_cast<double>(n)).epsilon(1e-12));
  CHECK_THROWS_AS(xpasc::xpasc(corpus, oracle, m, -1.0), ConfigError);
  CHECK_THROWS_AS(xpasc::xpasc(corpus, oracle, m, std::nan("")), ConfigError);
}

TEST_CASE("breakdown reproduces the score") {
  const Corpus corpus = xpasc::testing::planted_corpus({.instances = 80});
  std::mt19937_64 rng(3);
  const auto oracle = random_bow(corpus, rng);
  for (auto method : {AssociationMethod::chi2, AssociationMethod::ppmi, AssociationMethod::npmi}) {
    const auto r = xpasc::xpasc(corpus, oracle, build_association(corpus, method), 1.0, {"m", 4});
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& inst : r.instances) {
      for (const auto& t : inst.terms) {
        CHECK(t.product == t.explainability * t.association);
        sum += t.product;
        ++n;
      }
    }
    CHECK(n == r.num_terms);
    CHECK(r.num_instances == corpus.size());
    CHECK(std::abs(1.0 + sum / static_cast<double>(n) - r.score) < 1e-12);
    CHECK(r.method == method);
    CHECK(r.model_id == "m");
    CHECK(r.seed == 4u);
  }
}

TEST_CASE("terms cover each distinct feature once") {
  const Corpus corpus = xpasc::testing::planted_corpus({.instances = 30});
  std::mt19937_64 rng(4);
  const auto r = xpasc::xpasc(corpus, random_bow(corpus, rng), build_association(corpus, AssociationMethod::chi2));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto expected = distinct_features(corpus.instances()[i], corpus.vocabulary());
    REQUIRE(r.instances[i].terms.size() == expected.size());
    for (std::size_t k = 0; k < expected.size(); ++k) CHECK(r.instances[i].terms[k].feature == expected[k]);
  }
}

TEST_CASE("vocabulary and shape checks") {
  const Corpus a = xpasc::testing::planted_corpus({.instances = 30});
  const Corpus b(CorpusMeta{{"A", "B"}, {{"l0", 0}}}, {{"i", {"f"}, 0, {0}}});
  std::mt19937_64 rng(5);
  const auto oracle = random_bow(a, rng);
  CHECK_THROWS_AS(xpasc::xpasc(a, oracle, build_association(b, AssociationMethod::chi2)), ConfigError);
  auto bad = zero_matrices(a);
  bad.lf_assoc = Eigen::MatrixXd::Zero(1, a.vocabulary().size());
  CHECK_THROWS_AS(xpasc::xpasc(a, oracle, bad), ConfigError);
}

TEST_CASE("duplication laws") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Corpus c = xpasc::testing::random_corpus(rng);
    const Corpus d = xpasc::testing::duplicated(c);
    const auto oracle = random_bow(c, rng);
    const double p1 = xpasc::xpasc(c, oracle, build_association(c, AssociationMethod::ppmi)).score;
    const double p2 = xpasc::xpasc(d, oracle, build_association(d, AssociationMethod::ppmi)).score;
    CHECK(std::abs(p1 - p2) < 1e-10);
    const double c1 = xpasc::xpasc(c, oracle, build_association(c, AssociationMethod::chi2)).score;
    const double c2 = xpasc::xpasc(d, oracle, build_association(d, AssociationMethod::chi2)).score;
    CHECK(std::abs((c2 - 1.0) - 2.0 * (c1 - 1.0)) < 1e-9);
  }
}

TEST_CASE("minmax scaling") {
  CHECK(minmax_scale(std::vector<double>{2, 4, 6}) == std::vector<double>{0, 0.5, 1});
  CHECK(minmax_scale(std::vector<double>{5, 5, 5}) == std::vector<double>{0, 0, 0});
  CHECK(minmax_scale(std::vector<double>{0, 1}) == std::vector<double>{0, 1});
  Eigen::Vector3f v(1.f, 3.f, 2.f);
  CHECK(minmax_scale(v)(2) == doctest::Approx(0.5));
  CHECK_THROWS_AS(minmax_scale(std::vector<double>{}), DimensionError);
}

TEST_CASE("scaled variant") {
  SUBCASE("components lie in the unit interval") {
    const Corpus corpus = xpasc::testing::planted_corpus({.instances = 80});
    std::mt19937_64 rng(7);
    const auto r = xpasc_scaled(corpus, random_bow(corpus, rng), count_cooccurrences(corpus), 1.0);
    CHECK(r.scaled);
    CHECK(r.method == AssociationMethod::npmi);
    for (const auto& inst : r.instances) {
      for (const auto& t : inst.terms) {
        CHECK(t.explainability >= 0.0);
        CHECK(t.explainability <= 1.0);
        CHECK(t.association >= 0.0);
        CHECK(t.association <= 1.0);
      }
    }
    CHECK(r.score >= 1.0);
    CHECK(r.score <= 2.0);
  }
  SUBCASE("independent corpus scores one") {
    const Corpus corpus(CorpusMeta{{"A", "B"}, {{"l0", 0}, {"l1", 1}}},
                        {{"1", {"x"}, 0, {0}}, {"2", {"x"}, 1, {1}}, {"3", {"y"}, 0, {0}}, {"4", {"y"}, 1, {1}}});
    const KeyOracle oracle("x", 0.3);
    CHECK(xpasc_scaled(corpus, oracle, count_cooccurrences(corpus)).score == 1.0);
    CHECK(xpasc::xpasc(corpus, oracle, build_association(corpus, AssociationMethod::npmi)).score == 1.0);
  }
}

TEST_CASE("report json") {
  const Corpus corpus(CorpusMeta{{"A", "B"}, {{"l0", 0}}}, {{"i", {"f"}, 0, {0}}});
  const auto r = xpasc::xpasc(corpus, KeyOracle("f", 0.25), zero_matrices(corpus), 1.0, {"bow:abc", 7});
  const auto text = report_to_json(r, corpus.vocabulary());
  CHECK(text.find("\"score\": 1.0") != std::string::npos);
  CHECK(text.find("\"model_id\": \"bow:abc\"") != std::string::npos);
  CHECK(text.find("\"feature\": \"f\"") != std::string::npos);
}

TEST_CASE("shift analysis") {
  const ShiftFixture fx;
  const KeyOracle on_trigger("t", 0.4);
  const KeyOracle on_class("c", 0.4);
  const KeyOracle on_neither("n", 0.4);

  SUBCASE("identical models never shift") {
    const Corpus corpus = xpasc::testing::planted_corpus({.instances = 40});
    std::mt19937_64 rng(8);
    const auto oracle = random_bow(corpus, rng);
    const auto r = shift_analysis(corpus, oracle, oracle, build_association(corpus, AssociationMethod::chi2));
    CHECK(r.none == corpus.size());
    CHECK(r.records.size() == corpus.size());
  }
  SUBCASE("trigger to class word") {
    const auto r = shift_analysis(fx.corpus, on_trigger, on_class, fx.matrices);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].kind == ShiftKind::to_class);
    CHECK(r.to_class == 1);
    CHECK(fx.corpus.vocabulary().feature(r.records[0].top_feature_a) == "t");
    CHECK(fx.corpus.vocabulary().feature(r.records[0].top_feature_b) == "c");
  }
  SUBCASE("trigger to a neutral word") {
    const auto r = shift_analysis(fx.corpus, on_trigger, on_neither, fx.matrices);
    CHECK(r.records[0].kind == ShiftKind::off_lf);
    CHECK(r.off_lf == 1);
  }
  SUBCASE("no shift away from a class word") {
    CHECK(shift_analysis(fx.corpus, on_class, on_trigger, fx.matrices).none == 1);
    CHECK(shift_analysis(fx.corpus, on_neither, on_class, fx.matrices).none == 1);
  }
  SUBCASE("ties go to the lowest index") {
    ExplainabilityMap m{"i", {{3, 0.2}, {1, 0.7}, {2, 0.7}}, false};
    CHECK(top_feature(m) == 1);
  }
  SUBCASE("kinds are total") {
    const Corpus corpus = xpasc::testing::planted_corpus({.instances = 60});
    std::mt19937_64 rng(9);
    const auto a = random_bow(corpus, rng);
    const auto b = random_bow(corpus, rng);
    const auto r = shift_analysis(corpus, a, b, build_association(corpus, AssociationMethod::chi2));
    CHECK(r.none + r.off_lf + r.to_class == corpus.size());
  }
  CHECK(to_string(ShiftKind::to_class) == "to-class");
  CHECK(to_string(ShiftKind::off_lf) == "off-LF");
  CHECK(to_string(ShiftKind::none) == "none");
}

TEST_CASE("ranks and correlation") {
  CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
  CHECK(*spearman_correlation(std::vector<double>{0, 1, 2}, std::vector<double>{1, 5, 9}) == doctest::Approx(1.0));
  CHECK(*spearman_correlation(std::vector<double>{0, 1, 2}, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0));
  CHECK_FALSE(spearman_correlation(std::vector<double>{0}, std::vector<double>{1}).has_value());
  CHECK_FALSE(spearman_correlation(std::vector<double>{0, 1}, std::vector<double>{4, 4}).has_value());
}

TEST_CASE("lambda sweep") {
  const Corpus corpus = xpasc::testing::planted_corpus({.instances = 120});
  TrainConfig base;
  base.epochs = 3;

  SUBCASE("single cell") {
    const std::vector<double> lambdas{1.0};
    const std::vector<std::uint64_t> seeds{3};
    const auto r = lambda_sweep(corpus, lambdas, seeds, base, AssociationMethod::chi2);
    REQUIRE(r.cells.size() == 1);
    CHECK(r.cells[0].xpasc.has_value());
    CHECK_FALSE(r.spearman.has_value());
    const auto csv = sweep_to_csv(r);
    CHECK(csv.rfind("lambda,seed,xpasc,task_metric\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  }
  SUBCASE("a failing cell leaves the rest intact") {
    const std::vector<double> lambdas{0.0, -1.0, 2.0};
    const std::vector<std::uint64_t> seeds{1, 2};
    const auto r = lambda_sweep(corpus, lambdas, seeds, base, AssociationMethod::chi2);
    REQUIRE(r.cells.size() == 6);
    for (const auto& c : r.cells) {
      CHECK(c.error.has_value() == (c.lambda < 0));
      CHECK(c.xpasc.has_value() == (c.lambda >= 0));
    }
    CHECK(r.per_lambda[1].succeeded == 0);
    CHECK_FALSE(r.per_lambda[1].mean_xpasc.has_value());
    CHECK(r.spearman.has_value());
    CHECK(sweep_to_csv(r).find(",1,nan,nan\n") != std::string::npos);
  }
  SUBCASE("thread count does not change the report") {
    const std::vector<double> lambdas{0.0, 0.5, 1.0};
    const std::vector<std::uint64_t> seeds{1, 2};
    const auto one = lambda_sweep(corpus, lambdas, seeds, base, AssociationMethod::ppmi, 1);
    const auto three = lambda_sweep(corpus, lambdas, seeds, base, AssociationMethod::ppmi, 3);
    CHECK(sweep_to_csv(one) == sweep_to_csv(three));
    CHECK(sweep_summary_to_json(one) == sweep_summary_to_json(three));
  }
  SUBCASE("means match the cells") {
    const std::vector<double> lambdas{0.0, 4.0};
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const auto r = lambda_sweep(corpus, lambdas, seeds, base, AssociationMethod::chi2);
    for (std::size_t l = 0; l < 2; ++l) {
      double sum = 0.0;
      for (std::size_t s = 0; s < 3; ++s) sum += *r.cells[l * 3 + s].xpasc;
      CHECK(*r.per_lambda[l].mean_xpasc == doctest::Approx(sum / 3.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("planted corpus trend") {
  const Corpus corpus = xpasc::testing::trend_corpus();
  const std::vector<double> lambdas{0, 0.5, 1, 2, 4};
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const auto r = lambda_sweep(corpus, lambdas, seeds, TrainConfig{}, AssociationMethod::chi2, 2);
  REQUIRE(r.spearman.has_value());
  CHECK(*r.spearman == doctest::Approx(1.0));
}
