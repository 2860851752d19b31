#include "xpasc/models.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace xpasc {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "xpasc-checkpoint/1";

json flat(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

Eigen::MatrixXd unflat(const json& a, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != rows * cols) {
    throw LoadError("checkpoint tensor '" + name + "' does not match its declared shape");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a[k++].get<double>();
  return m;
}

json config_json(const TrainConfig& c) {
  return {{"lambda", c.lambda},
          {"learning_rate", c.learning_rate},
          {"discriminator_learning_rate", c.discriminator_learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"hidden_size", c.hidden_size},
          {"seed", c.seed}};
}

TrainConfig config_from(const json& j) {
  TrainConfig c;
  c.lambda = j.at("lambda").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.discriminator_learning_rate = j.at("discriminator_learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.hidden_size = j.at("hidden_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const PredictionOracle& Checkpoint::oracle() const {
  if (kind == ModelKind::mv_bow && bow) return *bow;
  if (kind == ModelKind::knowman && knowman) return *knowman;
  throw ConfigError("checkpoint holds no model of its declared kind");
}

std::string checkpoint_to_json(const Checkpoint& cp) {
  json j;
  j["format"] = kFormat;
  j["config"] = config_json(cp.config);
  j["seed"] = cp.config.seed;
  if (cp.kind == ModelKind::mv_bow) {
    const auto& m = cp.bow.value();
    j["model"] = "mv-bow";
    j["tie_policy"] = cp.tie_policy;
    j["vocabulary_digest"] = m.vocabulary().digest();
    j["shapes"] = {{"classes", m.num_classes()}, {"features", m.vocabulary().size()}};
    j["weights"] = {{"W", flat(m.weights())}, {"b", flat(m.bias())}};
  } else {
    const auto& m = cp.knowman.value();
    j["model"] = "knowman";
    j["lambda"] = m.lambda;
    j["vocabulary_digest"] = m.vocabulary().digest();
    j["shapes"] = {{"classes", m.num_classes()},
                   {"lfs", m.num_lfs()},
                   {"hidden", m.hidden_size()},
                   {"features", m.vocabulary().size()}};
    j["weights"] = {{"extractor_W", flat(m.extractor_weights)},
                    {"extractor_b", flat(m.extractor_bias)},
                    {"classifier_W", flat(m.classifier_weights)},
                    {"classifier_b", flat(m.classifier_bias)},
                    {"discriminator_W", flat(m.discriminator_weights)},
                    {"discriminator_b", flat(m.discriminator_bias)}};
  }
  return j.dump(1);
}

Checkpoint checkpoint_from_json(std::string_view text, const Vocabulary& vocab) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kFormat) throw LoadError("unsupported checkpoint format");
    const auto digest = j.at("vocabulary_digest").get<std::string>();
    if (digest != vocab.digest()) {
      throw ConfigError("vocabulary digest mismatch: checkpoint " + digest + " vs corpus " + vocab.digest());
    }
    Checkpoint cp;
    cp.config = config_from(j.at("config"));
    const auto& shapes = j.at("shapes");
    const auto& w = j.at("weights");
    const Eigen::Index V = vocab.size();
    if (shapes.at("features").get<Eigen::Index>() != V) throw LoadError("checkpoint feature count mismatch");
    const auto K = shapes.at("classes").get<Eigen::Index>();
    const auto kind = j.at("model").get<std::string>();
    if (kind == "mv-bow") {
      cp.kind = ModelKind::mv_bow;
      cp.tie_policy = j.value("tie_policy", "");
      cp.bow.emplace(vocab, unflat(w.at("W"), K, V, "W"), unflat(w.at("b"), K, 1, "b"));
    } else if (kind == "knowman") {
      cp.kind = ModelKind::knowman;
      const auto J = shapes.at("lfs").get<Eigen::Index>();
      const auto H = shapes.at("hidden").get<Eigen::Index>();
      KnowManModel m(vocab, static_cast<int>(H), static_cast<int>(K), static_cast<int>(J),
                     j.at("lambda").get<double>());
      m.extractor_weights = unflat(w.at("extractor_W"), H, V, "extractor_W");
      m.extractor_bias = unflat(w.at("extractor_b"), H, 1, "extractor_b");
      m.classifier_weights = unflat(w.at("classifier_W"), K, H, "classifier_W");
      m.classifier_bias = unflat(w.at("classifier_b"), K, 1, "classifier_b");
      m.discriminator_weights = unflat(w.at("discriminator_W"), J, H, "discriminator_W");
      m.discriminator_bias = unflat(w.at("discriminator_b"), J, 1, "discriminator_b");
      cp.knowman = std::move(m);
    } else {
      throw LoadError("unknown model kind '" + kind + "' in checkpoint");
    }
    return cp;
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << checkpoint_to_json(checkpoint) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary& vocab) {
  return checkpoint_from_json(read_file(path), vocab);
}

std::string checkpoint_vocabulary_digest(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path)).at("vocabulary_digest").get<std::string>();
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace xpasc
