#include "xpasc/models.hpp"

#include "xpasc/digest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xpasc {

KnowManModel::KnowManModel(Vocabulary vocab, int hidden_size, int num_classes, int num_lfs,
                           double lambda_)
    : extractor_weights(Eigen::MatrixXd::Zero(hidden_size, vocab.size())),
      extractor_bias(Eigen::VectorXd::Zero(hidden_size)),
      classifier_weights(Eigen::MatrixXd::Zero(num_classes, hidden_size)),
      classifier_bias(Eigen::VectorXd::Zero(num_classes)),
      discriminator_weights(Eigen::MatrixXd::Zero(num_lfs, hidden_size)),
      discriminator_bias(Eigen::VectorXd::Zero(num_lfs)),
      lambda(lambda_),
      vocab_(std::move(vocab)) {
  if (hidden_size <= 0 || num_classes <= 0 || num_lfs <= 0) {
    throw DimensionError("adversarial model needs positive hidden size, class count and LF count");
  }
}

KnowManModel KnowManModel::initialized(Vocabulary vocab, int hidden_size, int num_classes,
                                       int num_lfs, double lambda, std::uint64_t seed) {
  KnowManModel m(std::move(vocab), hidden_size, num_classes, num_lfs, lambda);
  auto rng = derive_stream(seed, "init");
  auto fill = [&rng](Eigen::MatrixXd& w) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, w.cols())));
    std::uniform_real_distribution<double> u(-bound, bound);
    // Column-major fill order is part of the determinism contract.
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
  };
  fill(m.extractor_weights);
  fill(m.classifier_weights);
  fill(m.discriminator_weights);
  return m;
}

Eigen::VectorXd KnowManModel::hidden(std::span<const FeatureIndex> features) const {
  Eigen::VectorXd a = extractor_bias;
  for (FeatureIndex f : features) a += extractor_weights.col(f);
  return a.array().tanh().matrix();
}

Eigen::VectorXd KnowManModel::class_probs(std::span<const FeatureIndex> features) const {
  return softmax(classifier_weights * hidden(features) + classifier_bias);
}

Eigen::VectorXd KnowManModel::lf_probs(std::span<const FeatureIndex> features) const {
  return softmax(discriminator_weights * hidden(features) + discriminator_bias);
}

PredictionDistribution KnowManModel::predict(std::span<const std::string> tokens) const {
  if (tokens.empty()) return PredictionDistribution::uniform(num_classes());
  return PredictionDistribution(class_probs(encode_presence(tokens, vocab_)));
}

PredictionDistribution KnowManModel::predict_lf(std::span<const std::string> tokens) const {
  if (tokens.empty()) return PredictionDistribution::uniform(num_lfs());
  return PredictionDistribution(lf_probs(encode_presence(tokens, vocab_)));
}

namespace {

double log_softmax_nll(const Eigen::VectorXd& z, Eigen::Index target) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum()) - z(target);
}

}  // namespace

KnowManLosses knowman_losses(const KnowManModel& model, const KnowManBatch& batch) {
  KnowManLosses out;
  if (batch.size() == 0) return out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd h = model.hidden(batch.inputs[i]);
    out.class_nll += log_softmax_nll(model.classifier_weights * h + model.classifier_bias,
                                     batch.class_targets[i]);
    out.lf_nll += log_softmax_nll(model.discriminator_weights * h + model.discriminator_bias,
                                  batch.lf_targets[i]);
  }
  out.class_nll /= static_cast<double>(batch.size());
  out.lf_nll /= static_cast<double>(batch.size());
  return out;
}

namespace {

enum GradientParts : unsigned {
  kClassifierPart = 1u << 0,
  kExtractorClassPart = 1u << 1,
  kDiscriminatorPart = 1u << 2,
  kExtractorReversedPart = 1u << 3,
  kAllParts = 0xFu,
};

KnowManGradients zero_gradients(const KnowManModel& m) {
  KnowManGradients g;
  g.extractor_weights_class = Eigen::MatrixXd::Zero(m.extractor_weights.rows(), m.extractor_weights.cols());
  g.extractor_bias_class = Eigen::VectorXd::Zero(m.extractor_bias.size());
  g.extractor_weights_reversed = g.extractor_weights_class;
  g.extractor_bias_reversed = g.extractor_bias_class;
  g.classifier_weights = Eigen::MatrixXd::Zero(m.classifier_weights.rows(), m.classifier_weights.cols());
  g.classifier_bias = Eigen::VectorXd::Zero(m.classifier_bias.size());
  g.discriminator_weights =
      Eigen::MatrixXd::Zero(m.discriminator_weights.rows(), m.discriminator_weights.cols());
  g.discriminator_bias = Eigen::VectorXd::Zero(m.discriminator_bias.size());
  return g;
}

KnowManGradients compute_gradients(const KnowManModel& m, const KnowManBatch& batch, double lambda,
                                   unsigned parts) {
  KnowManGradients g = zero_gradients(m);
  if (batch.size() == 0) return g;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& x = batch.inputs[i];
    const Eigen::VectorXd h = m.hidden(x);
    const Eigen::ArrayXd tanh_grad = 1.0 - h.array().square();

    if (parts & (kClassifierPart | kExtractorClassPart)) {
      Eigen::VectorXd dz = softmax(m.classifier_weights * h + m.classifier_bias);
      dz(batch.class_targets[i]) -= 1.0;
      dz *= inv_b;
      if (parts & kClassifierPart) {
        g.classifier_weights.noalias() += dz * h.transpose();
        g.classifier_bias += dz;
      }
      if (parts & kExtractorClassPart) {
        const Eigen::VectorXd da = ((m.classifier_weights.transpose() * dz).array() * tanh_grad).matrix();
        g.extractor_bias_class += da;
        for (FeatureIndex f : x) g.extractor_weights_class.col(f) += da;
      }
    }

    if (parts & (kDiscriminatorPart | kExtractorReversedPart)) {
      Eigen::VectorXd dz = softmax(m.discriminator_weights * h + m.discriminator_bias);
      dz(batch.lf_targets[i]) -= 1.0;
      dz *= inv_b;
      if (parts & kDiscriminatorPart) {
        g.discriminator_weights.noalias() += dz * h.transpose();
        g.discriminator_bias += dz;
      }
      if (parts & kExtractorReversedPart) {
        // Gradient reversal: the discriminator gradient enters the extractor
        // multiplied by -lambda.
        const Eigen::VectorXd da =
            (-lambda * (m.discriminator_weights.transpose() * dz).array() * tanh_grad).matrix();
        g.extractor_bias_reversed += da;
        for (FeatureIndex f : x) g.extractor_weights_reversed.col(f) += da;
      }
    }
  }
  return g;
}

}  // namespace

KnowManGradients knowman_gradients(const KnowManModel& model, const KnowManBatch& batch,
                                   double lambda) {
  return compute_gradients(model, batch, lambda, kAllParts);
}

void knowman_discriminator_step(KnowManModel& model, const KnowManBatch& batch, double learning_rate) {
  const auto g = compute_gradients(model, batch, 0.0, kDiscriminatorPart);
  model.discriminator_weights -= learning_rate * g.discriminator_weights;
  model.discriminator_bias -= learning_rate * g.discriminator_bias;
}

void knowman_task_step(KnowManModel& model, const KnowManBatch& batch, double learning_rate,
                       double lambda, bool gradient_reversal) {
  const unsigned parts = kClassifierPart | kExtractorClassPart |
                         (gradient_reversal ? kExtractorReversedPart : 0u);
  const auto g = compute_gradients(model, batch, lambda, parts);
  model.classifier_weights -= learning_rate * g.classifier_weights;
  model.classifier_bias -= learning_rate * g.classifier_bias;
  if (gradient_reversal) {
    model.extractor_weights -= learning_rate * (g.extractor_weights_class + g.extractor_weights_reversed);
    model.extractor_bias -= learning_rate * (g.extractor_bias_class + g.extractor_bias_reversed);
  } else {
    model.extractor_weights -= learning_rate * g.extractor_weights_class;
    model.extractor_bias -= learning_rate * g.extractor_bias_class;
  }
}

namespace {

KnowManBatch batch_from(const Corpus& corpus, const std::vector<std::vector<FeatureIndex>>& encoded,
                        std::span<const std::size_t> indices, std::mt19937_64& rng) {
  KnowManBatch b;
  b.inputs.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto& inst = corpus.instances().at(i);
    if (inst.lf_matches.empty()) {
      throw TrainingError("instance '" + inst.id + "' has no labeling-function match");
    }
    b.inputs.push_back(encoded[i]);
    b.class_targets.push_back(inst.weak_label);
    std::uniform_int_distribution<std::size_t> pick(0, inst.lf_matches.size() - 1);
    b.lf_targets.push_back(inst.lf_matches[pick(rng)]);
  }
  return b;
}

std::vector<std::vector<FeatureIndex>> encode_corpus(const Corpus& corpus) {
  std::vector<std::vector<FeatureIndex>> out;
  out.reserve(corpus.size());
  for (const auto& inst : corpus.instances()) out.push_back(distinct_features(inst, corpus.vocabulary()));
  return out;
}

}  // namespace

KnowManBatch make_knowman_batch(const Corpus& corpus, std::span<const std::size_t> indices,
                                std::mt19937_64& rng) {
  return batch_from(corpus, encode_corpus(corpus), indices, rng);
}

TrainOutcome<KnowManModel> train_knowman(const Corpus& corpus, const TrainConfig& config) {
  config.validate();
  if (corpus.size() == 0) throw TrainingError("cannot train on an empty corpus");
  TrainOutcome<KnowManModel> out{
      KnowManModel::initialized(corpus.vocabulary(), config.hidden_size, corpus.num_classes(),
                                corpus.num_lfs(), config.lambda, config.seed),
      0.0, 0.0, {}};
  if (corpus.num_lfs() < 2) {
    out.warnings.push_back("fewer than two labeling functions: the discriminator is degenerate");
  }
  auto& model = out.model;
  const auto encoded = encode_corpus(corpus);
  auto shuffle_rng = derive_stream(config.seed, "shuffle");
  auto lf_rng = derive_stream(config.seed, "lf-sampling");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t n = std::min(batch, order.size() - start);
      const auto b = batch_from(corpus, encoded, std::span(order).subspan(start, n), lf_rng);
      knowman_discriminator_step(model, b, config.discriminator_learning_rate);
      knowman_task_step(model, b, config.learning_rate, config.lambda, config.gradient_reversal);
    }
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& inst = corpus.instances()[i];
    const Eigen::VectorXd z =
        model.classifier_weights * model.hidden(encoded[i]) + model.classifier_bias;
    out.final_loss += log_softmax_nll(z, inst.weak_label);
    Eigen::Index best = 0;
    z.maxCoeff(&best);
    if (best == inst.weak_label) ++correct;
  }
  out.final_loss /= static_cast<double>(corpus.size());
  out.task_metric = static_cast<double>(correct) / static_cast<double>(corpus.size());
  return out;
}

GradientCheckResult gradient_check(const KnowManModel& model, const KnowManBatch& batch,
                                   double lambda, std::uint64_t seed, int samples_per_tensor,
                                   double step) {
  const KnowManGradients analytic = knowman_gradients(model, batch, lambda);
  KnowManModel probe = model;
  auto rng = derive_stream(seed, "gradient-check");
  GradientCheckResult result;

  auto task_objective = [&] {
    const auto l = knowman_losses(probe, batch);
    return l.class_nll - lambda * l.lf_nll;
  };
  auto disc_objective = [&] { return knowman_losses(probe, batch).lf_nll; };

  auto check = [&](auto& tensor, const auto& grad, auto objective) {
    if (tensor.size() == 0) return;
    std::uniform_int_distribution<Eigen::Index> pick(0, tensor.size() - 1);
    for (int s = 0; s < samples_per_tensor; ++s) {
      const Eigen::Index k = pick(rng);
      const double saved = tensor.data()[k];
      tensor.data()[k] = saved + step;
      const double up = objective();
      tensor.data()[k] = saved - step;
      const double down = objective();
      tensor.data()[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = grad.data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
      ++result.parameters_checked;
    }
  };

  const Eigen::MatrixXd extractor_w = analytic.extractor_weights_class + analytic.extractor_weights_reversed;
  const Eigen::VectorXd extractor_b = analytic.extractor_bias_class + analytic.extractor_bias_reversed;
  check(probe.extractor_weights, extractor_w, task_objective);
  check(probe.extractor_bias, extractor_b, task_objective);
  check(probe.classifier_weights, analytic.classifier_weights, task_objective);
  check(probe.classifier_bias, analytic.classifier_bias, task_objective);
  check(probe.discriminator_weights, analytic.discriminator_weights, disc_objective);
  check(probe.discriminator_bias, analytic.discriminator_bias, disc_objective);
  return result;
}

}  // namespace xpasc
