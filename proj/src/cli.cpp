#include "xpasc/cli.hpp"

#include "xpasc/association.hpp"
#include "xpasc/corpus.hpp"
#include "xpasc/digest.hpp"
#include "xpasc/models.hpp"
#include "xpasc/score.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <thread>

namespace xpasc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

void add_corpus_inputs(RunManifest& m, const fs::path& dir) {
  for (const char* name : {kMetaFileName, kInstancesFileName}) {
    const fs::path p = dir / name;
    m.inputs[p.string()] = file_sha256_hex(p);
  }
}

void add_input(RunManifest& m, const fs::path& p) { m.inputs[p.string()] = file_sha256_hex(p); }

RunManifest start_manifest(const CLI::App& sub, const std::vector<std::string>& args) {
  RunManifest m;
  m.command = sub.get_name();
  m.argv = args;
  m.tool_version = kToolVersion;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name == "--help" || name.empty()) continue;
    std::string value;
    if (opt->get_expected_min() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    m.config[name] = value;
  }
  return m;
}

unsigned thread_cap() {
  const char* env = std::getenv("XPASC_THREADS");
  if (env == nullptr || *env == '\0') return std::max(1u, std::thread::hardware_concurrency());
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v <= 0) throw UsageError("XPASC_THREADS must be a positive integer");
  return static_cast<unsigned>(v);
}

std::string model_id(const fs::path& checkpoint_path, const Checkpoint& cp) {
  const std::string kind = cp.kind == ModelKind::mv_bow ? "mv-bow" : "knowman";
  return kind + ":" + file_sha256_hex(checkpoint_path).substr(0, 16);
}

struct TrainFlags {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  int epochs = 20;
  double lr = 0.1;
  double lr_disc = 0.1;
  int hidden = 16;
  int batch = 32;

  void add_to(CLI::App* sub, bool with_lambda_and_seed) {
    if (with_lambda_and_seed) {
      sub->add_option("--lambda", lambda, "gradient reversal strength (>= 0)");
      sub->add_option("--seed", seed, "seed for every random stream");
    }
    sub->add_option("--epochs", epochs, "training epochs");
    sub->add_option("--lr", lr, "learning rate of the classifier/extractor optimizer");
    sub->add_option("--lr-disc", lr_disc, "learning rate of the discriminator optimizer");
    sub->add_option("--hidden", hidden, "hidden size of the extractor");
    sub->add_option("--batch", batch, "mini-batch size");
  }

  TrainConfig config() const {
    TrainConfig c;
    c.lambda = lambda;
    c.seed = seed;
    c.epochs = epochs;
    c.learning_rate = lr;
    c.discriminator_learning_rate = lr_disc;
    c.hidden_size = hidden;
    c.batch_size = batch;
#ifdef XPASC_DISABLE_REVERSAL
    c.gradient_reversal = false;
#endif
    return c;
  }
};

std::string fmt_number(double v) { return json(v).dump(); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Measure how far weakly supervised models generalize from their labeling functions"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  // ingest
  std::string meta_path, data_path, out_path;
  auto* ingest = app.add_subcommand("ingest", "validate a corpus and drop instances without LF matches");
  ingest->add_option("--meta", meta_path, "metadata JSON")->required();
  ingest->add_option("--data", data_path, "instances JSON Lines")->required();
  ingest->add_option("--out", out_path, "output corpus directory")->required();

  // assoc
  std::string corpus_dir, method_name = "chi2";
  auto* assoc = app.add_subcommand("assoc", "build the class and LF association matrices");
  assoc->add_option("--corpus", corpus_dir, "filtered corpus directory")->required();
  assoc->add_option("--method", method_name, "chi2 | ppmi | npmi")
      ->check(CLI::IsMember({"chi2", "ppmi", "npmi"}));
  assoc->add_option("--out", out_path, "output matrices JSON")->required();

  // train
  std::string model_kind = "knowman", tie = "random";
  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_option("--corpus", corpus_dir, "filtered corpus directory")->required();
  train->add_option("--model", model_kind, "mv-bow | knowman")->check(CLI::IsMember({"mv-bow", "knowman"}));
  train_flags.add_to(train, true);
  train->add_option("--tie", tie, "majority-vote tie policy: random | abstain")
      ->check(CLI::IsMember({"random", "abstain"}));
  train->add_option("--out", out_path, "output checkpoint JSON")->required();

  // score
  std::string model_path, assoc_path;
  double gamma = 1.0;
  bool scaled = false;
  auto* score = app.add_subcommand("score", "compute the XPASC score of a model");
  score->add_option("--corpus", corpus_dir, "filtered corpus directory")->required();
  score->add_option("--model", model_path, "checkpoint JSON")->required();
  score->add_option("--assoc", assoc_path, "association matrices JSON")->required();
  score->add_option("--gamma", gamma, "explainability temperature (>= 0)");
  score->add_flag("--scaled", scaled, "NPMI + max-normalized explainability + MinMax variant");
  score->add_option("--out", out_path, "output report JSON")->required();

  // sweep
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds;
  std::string sweep_method = "chi2";
  TrainFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "train and score one adversarial model per (lambda, seed)");
  sweep->add_option("--corpus", corpus_dir, "filtered corpus directory")->required();
  sweep->add_option("--lambdas", lambdas, "comma separated lambda values")->required()->delimiter(',');
  sweep->add_option("--seeds", seeds, "comma separated seeds")->required()->delimiter(',');
  sweep->add_option("--assoc-method", sweep_method, "chi2 | ppmi | npmi")
      ->check(CLI::IsMember({"chi2", "ppmi", "npmi"}));
  sweep_flags.add_to(sweep, false);
  sweep->add_option("--out", out_path, "output directory")->required();

  // shift
  std::string model_a, model_b;
  auto* shift = app.add_subcommand("shift", "compare the top-explainability features of two models");
  shift->add_option("--corpus", corpus_dir, "filtered corpus directory")->required();
  shift->add_option("--model-a", model_a, "reference checkpoint (e.g. lambda = 0)")->required();
  shift->add_option("--model-b", model_b, "compared checkpoint (e.g. lambda = 4)")->required();
  shift->add_option("--assoc", assoc_path, "association matrices JSON")->required();
  shift->add_option("--out", out_path, "output report JSON")->required();

  // replay
  std::string manifest_file;
  auto* replay = app.add_subcommand("replay", "re-run a command from its manifest");
  replay->add_option("--manifest", manifest_file, "manifest JSON")->required();

  std::vector<const char*> argv{"xpasc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (ingest->parsed()) {
      auto manifest = start_manifest(*ingest, args);
      add_input(manifest, meta_path);
      add_input(manifest, data_path);
      const auto corpus = load_corpus(meta_path, data_path);
      const auto [filtered, stats] = filter_unmatched(corpus);
      save_corpus(filtered, out_path);
      const json s{{"original", stats.original_size},
                   {"filtered", stats.filtered_size},
                   {"retained", stats.retained_fraction}};
      write_text(fs::path(out_path) / "stats.json", s.dump(2));
      manifest.outputs = {(fs::path(out_path) / kMetaFileName).string(),
                          (fs::path(out_path) / kInstancesFileName).string(),
                          (fs::path(out_path) / "stats.json").string()};
      write_manifest(manifest, manifest_path_for_dir(out_path));
      out << "original " << stats.original_size << "\nfiltered " << stats.filtered_size
          << "\nretained " << fmt_number(stats.retained_fraction) << '\n';
      return 0;
    }

    if (assoc->parsed()) {
      auto manifest = start_manifest(*assoc, args);
      add_corpus_inputs(manifest, corpus_dir);
      const auto corpus = load_corpus(corpus_dir);
      const auto m = build_association(corpus, parse_association_method(method_name));
      write_text(out_path, matrices_to_json(m));
      manifest.outputs = {out_path};
      write_manifest(manifest, manifest_path_for_file(out_path));
      out << "wrote " << to_string(m.method) << " matrices (" << m.class_assoc.rows() << " classes, "
          << m.lf_assoc.rows() << " LFs, " << m.class_assoc.cols() << " features) to " << out_path << '\n';
      return 0;
    }

    if (train->parsed()) {
      auto manifest = start_manifest(*train, args);
      add_corpus_inputs(manifest, corpus_dir);
      manifest.seed = std::to_string(train_flags.seed);
      const auto corpus = load_corpus(corpus_dir);
      const TrainConfig cfg = train_flags.config();
      Checkpoint cp;
      cp.config = cfg;
      double loss = 0.0, metric = 0.0;
      std::vector<std::string> warnings;
      if (model_kind == "knowman") {
        auto trained = train_knowman(corpus, cfg);
        cp.kind = ModelKind::knowman;
        loss = trained.final_loss;
        metric = trained.task_metric;
        warnings = std::move(trained.warnings);
        cp.knowman = std::move(trained.model);
      } else {
        const TiePolicy policy = tie == "abstain" ? TiePolicy::abstain() : TiePolicy::random(cfg.seed);
        const auto labels = majority_vote_labels(corpus, policy);
        auto trained = train_bow_softmax(corpus, labels, cfg);
        cp.kind = ModelKind::mv_bow;
        cp.tie_policy = tie;
        loss = trained.final_loss;
        metric = trained.task_metric;
        cp.bow = std::move(trained.model);
      }
      for (const auto& w : warnings) err << "warning: " << w << '\n';
      write_text(out_path, checkpoint_to_json(cp));
      manifest.outputs = {out_path};
      write_manifest(manifest, manifest_path_for_file(out_path));
      out << "final_loss " << fmt_number(loss) << "\ntask_metric " << fmt_number(metric) << '\n';
      return 0;
    }

    if (score->parsed()) {
      auto manifest = start_manifest(*score, args);
      add_corpus_inputs(manifest, corpus_dir);
      add_input(manifest, model_path);
      add_input(manifest, assoc_path);
      const auto corpus = load_corpus(corpus_dir);
      const auto cp = load_checkpoint(model_path, corpus.vocabulary());
      const auto matrices = load_matrices(assoc_path);
      if (matrices.vocabulary.digest() != corpus.vocabulary().digest()) {
        throw ConfigError("vocabulary digest mismatch: matrices " + matrices.vocabulary.digest() +
                          " vs corpus " + corpus.vocabulary().digest());
      }
      manifest.seed = std::to_string(cp.config.seed);
      const ReportTags tags{model_id(model_path, cp), cp.config.seed};
      const auto report = scaled
                              ? xpasc_scaled(corpus, cp.oracle(), count_cooccurrences(corpus), gamma, tags)
                              : xpasc(corpus, cp.oracle(), matrices, gamma, tags);
      write_text(out_path, report_to_json(report, corpus.vocabulary()));
      manifest.outputs = {out_path};
      write_manifest(manifest, manifest_path_for_file(out_path));
      out << "xpasc " << fmt_number(report.score) << '\n';
      return 0;
    }

    if (sweep->parsed()) {
      auto manifest = start_manifest(*sweep, args);
      add_corpus_inputs(manifest, corpus_dir);
      const unsigned threads = thread_cap();
      const auto corpus = load_corpus(corpus_dir);
      const auto report = lambda_sweep(corpus, lambdas, seeds, sweep_flags.config(),
                                       parse_association_method(sweep_method), threads);
      std::size_t ok = 0;
      for (const auto& c : report.cells) {
        if (c.error) {
          err << "cell lambda=" << fmt_number(c.lambda) << " seed=" << c.seed << " failed: " << *c.error << '\n';
        } else {
          ++ok;
        }
      }
      if (ok == 0) {
        err << "error: every sweep cell failed\n";
        return 1;
      }
      const fs::path dir(out_path);
      write_text(dir / "sweep.csv", sweep_to_csv(report));
      write_text(dir / "summary.json", sweep_summary_to_json(report));
      manifest.outputs = {(dir / "sweep.csv").string(), (dir / "summary.json").string()};
      write_manifest(manifest, manifest_path_for_dir(dir));
      for (const auto& s : report.per_lambda) {
        out << "lambda " << fmt_number(s.lambda) << " mean_xpasc "
            << (s.mean_xpasc ? fmt_number(*s.mean_xpasc) : "n/a") << '\n';
      }
      out << "spearman " << (report.spearman ? fmt_number(*report.spearman) : "n/a") << '\n';
      return 0;
    }

    if (shift->parsed()) {
      auto manifest = start_manifest(*shift, args);
      add_corpus_inputs(manifest, corpus_dir);
      add_input(manifest, model_a);
      add_input(manifest, model_b);
      add_input(manifest, assoc_path);
      const auto corpus = load_corpus(corpus_dir);
      const auto a = load_checkpoint(model_a, corpus.vocabulary());
      const auto b = load_checkpoint(model_b, corpus.vocabulary());
      const auto matrices = load_matrices(assoc_path);
      if (matrices.vocabulary.digest() != corpus.vocabulary().digest()) {
        throw ConfigError("vocabulary digest mismatch: matrices " + matrices.vocabulary.digest() +
                          " vs corpus " + corpus.vocabulary().digest());
      }
      const auto report = shift_analysis(corpus, a.oracle(), b.oracle(), matrices);
      write_text(out_path, shift_report_to_json(report, corpus.vocabulary()));
      manifest.outputs = {out_path};
      write_manifest(manifest, manifest_path_for_file(out_path));
      out << "none " << report.none << "\noff-LF " << report.off_lf << "\nto-class " << report.to_class << '\n';
      return 0;
    }

    if (replay->parsed()) {
      const auto manifest = read_manifest(manifest_file);
      if (manifest.command == "replay") throw UsageError("refusing to replay a replay");
      for (const auto& [path, digest] : manifest.inputs) {
        const auto now = file_sha256_hex(path);
        if (now != digest) {
          throw ConfigError("input " + path + " changed since the run (recorded " + digest + ", now " + now + ")");
        }
      }
      return run(manifest.argv, out, err);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace xpasc::cli
