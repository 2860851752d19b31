#pragma once

#include "xpasc/common.hpp"
#include "xpasc/corpus.hpp"
#include "xpasc/oracle.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace xpasc {

// --- majority vote --------------------------------------------------------

struct TiePolicy {
  enum class Kind { random, abstain };
  Kind kind = Kind::random;
  std::uint64_t seed = 0;

  static TiePolicy random(std::uint64_t seed) { return {Kind::random, seed}; }
  static TiePolicy abstain() { return {Kind::abstain, 0}; }
};

// Plurality over the classes voted by the matching LFs. On a tie the random
// policy draws uniformly among the tied classes from a stream derived from
// the seed and the instance id, so the choice does not depend on corpus order.
// nullopt means abstain.
std::optional<ClassIndex> majority_vote_label(const Instance& instance, const CorpusMeta& meta,
                                              const TiePolicy& policy);

std::vector<std::optional<ClassIndex>> majority_vote_labels(const Corpus& corpus,
                                                            const TiePolicy& policy);

// --- training configuration ----------------------------------------------

struct TrainConfig {
  double lambda = 0.0;
  double learning_rate = 0.1;
  double discriminator_learning_rate = 0.1;
  int epochs = 20;
  int batch_size = 32;
  int hidden_size = 16;
  std::uint64_t seed = 0;
  // Test switch: when false the discriminator gradient never reaches the
  // extractor, regardless of lambda.
  bool gradient_reversal = true;

  // Throws ConfigError. Epochs may be zero (untrained model).
  void validate() const;
};

// Binary presence encoding: sorted distinct vocabulary indices, OOV dropped.
std::vector<FeatureIndex> encode_presence(std::span<const std::string> tokens, const Vocabulary& vocab);

// --- bag-of-words softmax -------------------------------------------------

class BowSoftmaxModel final : public PredictionOracle {
 public:
  BowSoftmaxModel(Vocabulary vocab, int num_classes);
  BowSoftmaxModel(Vocabulary vocab, Eigen::MatrixXd weights, Eigen::VectorXd bias);

  PredictionDistribution predict(std::span<const std::string> tokens) const override;
  int num_classes() const override { return static_cast<int>(weights_.rows()); }

  Eigen::VectorXd logits(std::span<const FeatureIndex> features) const;

  const Vocabulary& vocabulary() const { return vocab_; }
  const Eigen::MatrixXd& weights() const { return weights_; }  // K x V
  const Eigen::VectorXd& bias() const { return bias_; }
  Eigen::MatrixXd& weights() { return weights_; }
  Eigen::VectorXd& bias() { return bias_; }

 private:
  Vocabulary vocab_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
};

template <typename Model>
struct TrainOutcome {
  Model model;
  double final_loss = 0.0;     // mean training NLL against the training labels
  double task_metric = 0.0;    // accuracy against the training labels
  std::vector<std::string> warnings;
};

// Mini-batch SGD on the mean NLL, zero-initialized. Instances whose label is
// nullopt are skipped. Throws TrainingError if no instance is usable.
TrainOutcome<BowSoftmaxModel> train_bow_softmax(const Corpus& corpus,
                                                std::span<const std::optional<ClassIndex>> labels,
                                                const TrainConfig& config);

// --- adversarial model -----------------------------------------------------

// Shared extractor h = tanh(We x + be), class head softmax(Wc h + bc) and
// LF discriminator head softmax(Wd h + bd). The gradient reversal between h
// and the discriminator is the identity in the forward pass, so lambda only
// matters during training.
class KnowManModel final : public PredictionOracle {
 public:
  KnowManModel() = default;
  KnowManModel(Vocabulary vocab, int hidden_size, int num_classes, int num_lfs, double lambda);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases.
  static KnowManModel initialized(Vocabulary vocab, int hidden_size, int num_classes, int num_lfs,
                                  double lambda, std::uint64_t seed);

  PredictionDistribution predict(std::span<const std::string> tokens) const override;
  int num_classes() const override { return static_cast<int>(classifier_weights.rows()); }
  int num_lfs() const { return static_cast<int>(discriminator_weights.rows()); }
  int hidden_size() const { return static_cast<int>(extractor_weights.rows()); }

  PredictionDistribution predict_lf(std::span<const std::string> tokens) const;

  Eigen::VectorXd hidden(std::span<const FeatureIndex> features) const;
  Eigen::VectorXd class_probs(std::span<const FeatureIndex> features) const;
  Eigen::VectorXd lf_probs(std::span<const FeatureIndex> features) const;

  const Vocabulary& vocabulary() const { return vocab_; }

  Eigen::MatrixXd extractor_weights;      // H x V
  Eigen::VectorXd extractor_bias;         // H
  Eigen::MatrixXd classifier_weights;     // K x H
  Eigen::VectorXd classifier_bias;        // K
  Eigen::MatrixXd discriminator_weights;  // J x H
  Eigen::VectorXd discriminator_bias;     // J
  double lambda = 0.0;

 private:
  Vocabulary vocab_;
};

struct KnowManBatch {
  std::vector<std::vector<FeatureIndex>> inputs;
  std::vector<ClassIndex> class_targets;
  std::vector<LfIndex> lf_targets;

  std::size_t size() const { return inputs.size(); }
};

struct KnowManLosses {
  double class_nll = 0.0;  // mean over the batch
  double lf_nll = 0.0;
};

KnowManLosses knowman_losses(const KnowManModel& model, const KnowManBatch& batch);

// Gradients of the batch losses. The extractor gradient is split by source:
// `extractor_*_class` is d(class NLL)/dF and `extractor_*_reversed` is the
// discriminator gradient after the reversal layer, i.e. -lambda * d(LF NLL)/dF.
struct KnowManGradients {
  Eigen::MatrixXd extractor_weights_class;
  Eigen::VectorXd extractor_bias_class;
  Eigen::MatrixXd extractor_weights_reversed;
  Eigen::VectorXd extractor_bias_reversed;
  Eigen::MatrixXd classifier_weights;
  Eigen::VectorXd classifier_bias;
  Eigen::MatrixXd discriminator_weights;
  Eigen::VectorXd discriminator_bias;
};

KnowManGradients knowman_gradients(const KnowManModel& model, const KnowManBatch& batch,
                                   double lambda);

// One discriminator update on the LF NLL; extractor and classifier untouched.
void knowman_discriminator_step(KnowManModel& model, const KnowManBatch& batch, double learning_rate);
// One update of extractor and classifier on the class NLL plus the reversed
// discriminator gradient; discriminator untouched.
void knowman_task_step(KnowManModel& model, const KnowManBatch& batch, double learning_rate,
                       double lambda, bool gradient_reversal = true);

// Alternating adversarial training on the corpus weak labels. The
// discriminator target of a multi-match instance is drawn uniformly from its
// matches on every visit.
TrainOutcome<KnowManModel> train_knowman(const Corpus& corpus, const TrainConfig& config);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters_checked = 0;
};

// Compares analytic gradients with central finite differences on
// `samples_per_tensor` random entries of every parameter tensor. Extractor and
// classifier entries are checked against class NLL - lambda * LF NLL, the
// discriminator against LF NLL. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradientCheckResult gradient_check(const KnowManModel& model, const KnowManBatch& batch,
                                   double lambda, std::uint64_t seed, int samples_per_tensor = 6,
                                   double step = 1e-5);

// Batch of the given instances; LF targets are drawn from each instance's
// matches with `rng`.
KnowManBatch make_knowman_batch(const Corpus& corpus, std::span<const std::size_t> indices,
                                std::mt19937_64& rng);

double accuracy(const PredictionOracle& oracle, const Corpus& corpus);

// --- checkpoints ------------------------------------------------------------
//
// JSON: {"format", "model": "mv-bow"|"knowman", "shapes", "vocabulary_digest",
//        "weights": {name: flat row-major array}, "config", "seed"}.

enum class ModelKind { mv_bow, knowman };

struct Checkpoint {
  ModelKind kind = ModelKind::knowman;
  TrainConfig config;
  std::optional<BowSoftmaxModel> bow;
  std::optional<KnowManModel> knowman;
  std::string tie_policy;  // mv-bow only

  const PredictionOracle& oracle() const;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
// Throws ConfigError when the stored vocabulary digest differs from `vocab`.
Checkpoint checkpoint_from_json(std::string_view text, const Vocabulary& vocab);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary& vocab);
// Reads only the vocabulary digest field.
std::string checkpoint_vocabulary_digest(const std::filesystem::path& path);

}  // namespace xpasc
