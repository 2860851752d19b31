#pragma once

#include "xpasc/common.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xpasc {

struct Instance {
  std::string id;
  std::vector<std::string> tokens;
  ClassIndex weak_label = 0;
  std::vector<LfIndex> lf_matches;

  bool operator==(const Instance&) const = default;
};

struct LabelingFunction {
  std::string name;
  ClassIndex target_class = 0;

  bool operator==(const LabelingFunction&) const = default;
};

struct CorpusMeta {
  std::vector<std::string> class_names;
  std::vector<LabelingFunction> lfs;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  int num_lfs() const { return static_cast<int>(lfs.size()); }

  bool operator==(const CorpusMeta&) const = default;
};

// Bijection between feature strings and indices. Indices follow byte-wise
// lexicographic order of the strings, so the mapping depends only on the
// feature set and not on instance order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> features);

  static Vocabulary from_instances(std::span<const Instance> instances);

  FeatureIndex size() const { return static_cast<FeatureIndex>(features_.size()); }
  const std::string& feature(FeatureIndex f) const { return features_.at(static_cast<std::size_t>(f)); }
  const std::vector<std::string>& features() const { return features_; }

  std::optional<FeatureIndex> find(std::string_view token) const;
  // Throws LookupError for unknown tokens.
  FeatureIndex index_of(std::string_view token) const;

  // SHA-256 over the ordered feature list; used to pair corpora with
  // matrices and checkpoints.
  const std::string& digest() const { return digest_; }

  bool operator==(const Vocabulary& other) const { return features_ == other.features_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> features_;
  std::unordered_map<std::string, FeatureIndex, Hash, std::equal_to<>> index_;
  std::string digest_;
};

class Corpus {
 public:
  Corpus() = default;
  // Validates every instance against the metadata and builds the vocabulary.
  Corpus(CorpusMeta meta, std::vector<Instance> instances);

  const CorpusMeta& meta() const { return meta_; }
  const std::vector<Instance>& instances() const { return instances_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }

  std::size_t size() const { return instances_.size(); }
  int num_classes() const { return meta_.num_classes(); }
  int num_lfs() const { return meta_.num_lfs(); }

 private:
  CorpusMeta meta_;
  std::vector<Instance> instances_;
  Vocabulary vocabulary_;
};

// Sorted distinct feature indices of an instance.
std::vector<FeatureIndex> distinct_features(const Instance& instance, const Vocabulary& vocab);

struct FilterStats {
  std::size_t original_size = 0;
  std::size_t filtered_size = 0;
  double retained_fraction = 0.0;
};

struct FilterResult {
  Corpus corpus;
  FilterStats stats;
};

// Drops instances without labeling-function matches. Throws EmptyCorpusError
// when nothing survives.
FilterResult filter_unmatched(const Corpus& corpus);

// Instance-level binary co-occurrence counts.
struct CountTables {
  CountMatrix feature_class;   // V x K
  CountMatrix feature_lf;      // V x J
  CountVector feature_class_marginal;  // row sums of feature_class
  CountVector class_marginal;          // column sums of feature_class
  CountVector feature_lf_marginal;     // row sums of feature_lf
  CountVector lf_marginal;             // column sums of feature_lf
  Count class_total = 0;
  Count lf_total = 0;
};

CountTables count_cooccurrences(const Corpus& corpus);

// --- File formats ---------------------------------------------------------
//
// Metadata: {"classes": [str...], "lfs": [{"name": str, "class": int}...]}
// Instances: JSON Lines, {"id": str, "tokens": [str...], "label": int,
//            "lf_matches": [int...]} per line.

CorpusMeta load_meta(const std::filesystem::path& meta_path);
Corpus load_corpus(const std::filesystem::path& meta_path, const std::filesystem::path& data_path);

// A corpus directory holds meta.json and instances.jsonl.
inline constexpr const char* kMetaFileName = "meta.json";
inline constexpr const char* kInstancesFileName = "instances.jsonl";
Corpus load_corpus(const std::filesystem::path& corpus_dir);
void save_corpus(const Corpus& corpus, const std::filesystem::path& corpus_dir);

}  // namespace xpasc
