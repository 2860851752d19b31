#include "xpasc/models.hpp"

#include "xpasc/digest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xpasc {

std::optional<ClassIndex> majority_vote_label(const Instance& instance, const CorpusMeta& meta,
                                              const TiePolicy& policy) {
  std::vector<int> votes(static_cast<std::size_t>(meta.num_classes()), 0);
  for (LfIndex l : instance.lf_matches) ++votes[static_cast<std::size_t>(meta.lfs.at(l).target_class)];
  const int best = *std::max_element(votes.begin(), votes.end());
  if (best == 0) return std::nullopt;
  std::vector<ClassIndex> tied;
  for (std::size_t c = 0; c < votes.size(); ++c) {
    if (votes[c] == best) tied.push_back(static_cast<ClassIndex>(c));
  }
  if (tied.size() == 1) return tied.front();
  if (policy.kind == TiePolicy::Kind::abstain) return std::nullopt;
  auto rng = derive_stream(policy.seed ^ stable_hash(instance.id), "tie-break");
  std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
  return tied[pick(rng)];
}

std::vector<std::optional<ClassIndex>> majority_vote_labels(const Corpus& corpus,
                                                            const TiePolicy& policy) {
  std::vector<std::optional<ClassIndex>> out;
  out.reserve(corpus.size());
  for (const auto& inst : corpus.instances()) out.push_back(majority_vote_label(inst, corpus.meta(), policy));
  return out;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid training config: " + what); };
  if (!std::isfinite(lambda) || lambda < 0.0) fail("lambda must be a finite value >= 0");
  if (!std::isfinite(learning_rate) || learning_rate <= 0.0) fail("learning rate must be > 0");
  if (!std::isfinite(discriminator_learning_rate) || discriminator_learning_rate <= 0.0) {
    fail("discriminator learning rate must be > 0");
  }
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_size <= 0) fail("batch size must be > 0");
  if (hidden_size <= 0) fail("hidden size must be > 0");
}

std::vector<FeatureIndex> encode_presence(std::span<const std::string> tokens, const Vocabulary& vocab) {
  std::vector<FeatureIndex> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto f = vocab.find(t)) out.push_back(*f);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// --- bag-of-words softmax -----------------------------------------------

BowSoftmaxModel::BowSoftmaxModel(Vocabulary vocab, int num_classes)
    : vocab_(std::move(vocab)),
      weights_(Eigen::MatrixXd::Zero(num_classes, vocab_.size())),
      bias_(Eigen::VectorXd::Zero(num_classes)) {
  if (num_classes <= 0) throw DimensionError("bag-of-words model needs at least one class");
}

BowSoftmaxModel::BowSoftmaxModel(Vocabulary vocab, Eigen::MatrixXd weights, Eigen::VectorXd bias)
    : vocab_(std::move(vocab)), weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.cols() != vocab_.size() || weights_.rows() != bias_.size() || bias_.size() == 0) {
    throw DimensionError("bag-of-words weights do not match vocabulary/bias shapes");
  }
}

Eigen::VectorXd BowSoftmaxModel::logits(std::span<const FeatureIndex> features) const {
  Eigen::VectorXd z = bias_;
  for (FeatureIndex f : features) z += weights_.col(f);
  return z;
}

PredictionDistribution BowSoftmaxModel::predict(std::span<const std::string> tokens) const {
  if (tokens.empty()) return PredictionDistribution::uniform(num_classes());
  return PredictionDistribution(softmax(logits(encode_presence(tokens, vocab_))));
}

namespace {

double nll_from_logits(const Eigen::VectorXd& z, Eigen::Index target) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return lse - z(target);
}

}  // namespace

TrainOutcome<BowSoftmaxModel> train_bow_softmax(const Corpus& corpus,
                                                std::span<const std::optional<ClassIndex>> labels,
                                                const TrainConfig& config) {
  config.validate();
  if (labels.size() != corpus.size()) {
    throw DimensionError("got " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(corpus.size()) + " instances");
  }
  const auto& vocab = corpus.vocabulary();
  std::vector<std::size_t> usable;
  std::vector<std::vector<FeatureIndex>> encoded(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!labels[i]) continue;
    if (*labels[i] < 0 || *labels[i] >= corpus.num_classes()) {
      throw TrainingError("label out of range for instance '" + corpus.instances()[i].id + "'");
    }
    usable.push_back(i);
    encoded[i] = distinct_features(corpus.instances()[i], vocab);
  }
  if (usable.empty()) throw TrainingError("no usable training instances (every label abstained)");

  BowSoftmaxModel model(vocab, corpus.num_classes());
  auto shuffle_rng = derive_stream(config.seed, "shuffle");
  const Eigen::Index K = corpus.num_classes();
  Eigen::MatrixXd grad_w = Eigen::MatrixXd::Zero(K, vocab.size());
  Eigen::VectorXd grad_b(K);
  std::vector<FeatureIndex> touched;

  std::vector<std::size_t> order = usable;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv_b = 1.0 / static_cast<double>(end - start);
      grad_b.setZero();
      touched.clear();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        Eigen::VectorXd d = softmax(model.logits(encoded[i]));
        d(*labels[i]) -= 1.0;
        d *= inv_b;
        grad_b += d;
        for (FeatureIndex f : encoded[i]) {
          grad_w.col(f) += d;
          touched.push_back(f);
        }
      }
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      for (FeatureIndex f : touched) {
        model.weights().col(f) -= config.learning_rate * grad_w.col(f);
        grad_w.col(f).setZero();
      }
      model.bias() -= config.learning_rate * grad_b;
    }
  }

  TrainOutcome<BowSoftmaxModel> out{std::move(model), 0.0, 0.0, {}};
  std::size_t correct = 0;
  for (std::size_t i : usable) {
    const Eigen::VectorXd z = out.model.logits(encoded[i]);
    out.final_loss += nll_from_logits(z, *labels[i]);
    Eigen::Index best = 0;
    z.maxCoeff(&best);
    if (best == *labels[i]) ++correct;
  }
  out.final_loss /= static_cast<double>(usable.size());
  out.task_metric = static_cast<double>(correct) / static_cast<double>(usable.size());
  return out;
}

double accuracy(const PredictionOracle& oracle, const Corpus& corpus) {
  if (corpus.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (const auto& inst : corpus.instances()) {
    if (oracle.predict(inst.tokens).argmax() == inst.weak_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(corpus.size());
}

}  // namespace xpasc
