#include "xpasc/corpus.hpp"

#include "xpasc/digest.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

namespace xpasc {

using nlohmann::json;

Vocabulary::Vocabulary(std::vector<std::string> features) : features_(std::move(features)) {
  std::sort(features_.begin(), features_.end());
  features_.erase(std::unique(features_.begin(), features_.end()), features_.end());
  index_.reserve(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    index_.emplace(features_[i], static_cast<FeatureIndex>(i));
  }
  digest_ = sequence_digest(features_);
}

Vocabulary Vocabulary::from_instances(std::span<const Instance> instances) {
  std::set<std::string> seen;
  for (const auto& inst : instances) seen.insert(inst.tokens.begin(), inst.tokens.end());
  return Vocabulary(std::vector<std::string>(seen.begin(), seen.end()));
}

std::optional<FeatureIndex> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

FeatureIndex Vocabulary::index_of(std::string_view token) const {
  if (auto f = find(token)) return *f;
  throw LookupError("feature '" + std::string(token) + "' is not in the vocabulary");
}

namespace {

void validate_meta(const CorpusMeta& meta) {
  if (meta.class_names.empty()) throw LoadError("metadata declares no classes");
  for (std::size_t j = 0; j < meta.lfs.size(); ++j) {
    const auto& lf = meta.lfs[j];
    if (lf.target_class < 0 || lf.target_class >= meta.num_classes()) {
      throw LoadError("labeling function '" + lf.name + "' (index " + std::to_string(j) +
                      ") votes for class " + std::to_string(lf.target_class) + " but only " +
                      std::to_string(meta.num_classes()) + " classes exist");
    }
  }
}

// Empty string when the instance is well formed, otherwise the reason.
std::string instance_problem(const Instance& inst, const CorpusMeta& meta) {
  if (inst.tokens.empty()) return "empty token list";
  if (inst.weak_label < 0 || inst.weak_label >= meta.num_classes()) {
    return "label " + std::to_string(inst.weak_label) + " out of range [0, " +
           std::to_string(meta.num_classes()) + ")";
  }
  std::unordered_set<LfIndex> seen;
  for (LfIndex l : inst.lf_matches) {
    if (l < 0 || l >= meta.num_lfs()) {
      return "lf_matches entry " + std::to_string(l) + " out of range [0, " +
             std::to_string(meta.num_lfs()) + ")";
    }
    if (!seen.insert(l).second) return "duplicate lf_matches entry " + std::to_string(l);
  }
  return {};
}

}  // namespace

Corpus::Corpus(CorpusMeta meta, std::vector<Instance> instances)
    : meta_(std::move(meta)), instances_(std::move(instances)) {
  validate_meta(meta_);
  std::unordered_set<std::string_view> ids;
  for (const auto& inst : instances_) {
    if (auto why = instance_problem(inst, meta_); !why.empty()) {
      throw LoadError("record '" + inst.id + "': " + why);
    }
    if (!ids.insert(inst.id).second) throw LoadError("duplicate instance id '" + inst.id + "'");
  }
  vocabulary_ = Vocabulary::from_instances(instances_);
}

std::vector<FeatureIndex> distinct_features(const Instance& instance, const Vocabulary& vocab) {
  std::vector<FeatureIndex> out;
  out.reserve(instance.tokens.size());
  for (const auto& t : instance.tokens) out.push_back(vocab.index_of(t));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

FilterResult filter_unmatched(const Corpus& corpus) {
  std::vector<Instance> kept;
  for (const auto& inst : corpus.instances()) {
    if (!inst.lf_matches.empty()) kept.push_back(inst);
  }
  if (kept.empty()) {
    throw EmptyCorpusError("no instance has a labeling-function match (" +
                           std::to_string(corpus.size()) + " instances filtered out)");
  }
  FilterStats stats;
  stats.original_size = corpus.size();
  stats.filtered_size = kept.size();
  stats.retained_fraction =
      static_cast<double>(stats.filtered_size) / static_cast<double>(stats.original_size);
  return {Corpus(corpus.meta(), std::move(kept)), stats};
}

CountTables count_cooccurrences(const Corpus& corpus) {
  const auto& vocab = corpus.vocabulary();
  const Eigen::Index V = vocab.size();
  CountTables t;
  t.feature_class = CountMatrix::Zero(V, corpus.num_classes());
  t.feature_lf = CountMatrix::Zero(V, corpus.num_lfs());
  for (const auto& inst : corpus.instances()) {
    for (FeatureIndex f : distinct_features(inst, vocab)) {
      t.feature_class(f, inst.weak_label) += 1;
      for (LfIndex l : inst.lf_matches) t.feature_lf(f, l) += 1;
    }
  }
  t.feature_class_marginal = t.feature_class.rowwise().sum();
  t.class_marginal = t.feature_class.colwise().sum().transpose();
  t.feature_lf_marginal = t.feature_lf.rowwise().sum();
  t.lf_marginal = t.feature_lf.colwise().sum().transpose();
  t.class_total = t.class_marginal.sum();
  t.lf_total = t.lf_marginal.sum();
  return t;
}

// --- I/O -------------------------------------------------------------------

namespace {

std::ifstream open_for_read(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw LoadError("cannot open " + p.string());
  return in;
}

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw LoadError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw LoadError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

CorpusMeta load_meta(const std::filesystem::path& meta_path) {
  auto in = open_for_read(meta_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(meta_path.string() + ": " + e.what());
  }
  const std::string where = meta_path.string();
  if (!j.is_object()) throw LoadError(where + ": metadata must be a JSON object");
  CorpusMeta meta;
  meta.class_names = required<std::vector<std::string>>(j, "classes", where);
  auto lfs = required<json>(j, "lfs", where);
  if (!lfs.is_array()) throw LoadError(where + ": 'lfs' must be an array");
  for (std::size_t i = 0; i < lfs.size(); ++i) {
    const std::string lf_where = where + " lfs[" + std::to_string(i) + "]";
    if (!lfs[i].is_object()) throw LoadError(lf_where + ": expected an object");
    meta.lfs.push_back({required<std::string>(lfs[i], "name", lf_where),
                        required<int>(lfs[i], "class", lf_where)});
  }
  validate_meta(meta);
  return meta;
}

Corpus load_corpus(const std::filesystem::path& meta_path, const std::filesystem::path& data_path) {
  CorpusMeta meta = load_meta(meta_path);
  auto in = open_for_read(data_path);
  std::vector<Instance> instances;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = data_path.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw LoadError(where + ": " + e.what());
    }
    if (!j.is_object()) throw LoadError(where + ": expected a JSON object");
    Instance inst;
    inst.id = required<std::string>(j, "id", where);
    where += " (record '" + inst.id + "')";
    inst.tokens = required<std::vector<std::string>>(j, "tokens", where);
    inst.weak_label = required<int>(j, "label", where);
    inst.lf_matches = required<std::vector<int>>(j, "lf_matches", where);
    if (auto why = instance_problem(inst, meta); !why.empty()) throw LoadError(where + ": " + why);
    if (!ids.insert(inst.id).second) {
      throw LoadError(where + ": duplicate instance id '" + inst.id + "'");
    }
    instances.push_back(std::move(inst));
  }
  return Corpus(std::move(meta), std::move(instances));
}

Corpus load_corpus(const std::filesystem::path& corpus_dir) {
  return load_corpus(corpus_dir / kMetaFileName, corpus_dir / kInstancesFileName);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& corpus_dir) {
  std::filesystem::create_directories(corpus_dir);
  json meta;
  meta["classes"] = corpus.meta().class_names;
  meta["lfs"] = json::array();
  for (const auto& lf : corpus.meta().lfs) {
    meta["lfs"].push_back({{"name", lf.name}, {"class", lf.target_class}});
  }
  {
    std::ofstream out(corpus_dir / kMetaFileName, std::ios::binary);
    out << meta.dump(2) << '\n';
  }
  std::ofstream out(corpus_dir / kInstancesFileName, std::ios::binary);
  for (const auto& inst : corpus.instances()) {
    json j{{"id", inst.id}, {"tokens", inst.tokens}, {"label", inst.weak_label},
           {"lf_matches", inst.lf_matches}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error("failed writing corpus to " + corpus_dir.string());
}

}  // namespace xpasc
