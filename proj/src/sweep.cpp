#include "xpasc/score.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace xpasc {

using nlohmann::json;

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("spearman_correlation: length mismatch");
  if (x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const Eigen::Map<const Eigen::VectorXd> a(rx.data(), static_cast<Eigen::Index>(rx.size()));
  const Eigen::Map<const Eigen::VectorXd> b(ry.data(), static_cast<Eigen::Index>(ry.size()));
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (!(denom > 0.0)) return std::nullopt;
  return da.dot(db) / denom;
}

SweepReport lambda_sweep(const Corpus& corpus, std::span<const double> lambdas,
                         std::span<const std::uint64_t> seeds, const TrainConfig& base,
                         AssociationMethod method, unsigned threads) {
  SweepReport report;
  report.method = method;
  const auto matrices = build_association(corpus, method);
  for (double lambda : lambdas) {
    for (std::uint64_t seed : seeds) report.cells.push_back({lambda, seed, {}, {}, {}});
  }

  auto run_cell = [&](SweepCell& cell) {
    try {
      TrainConfig cfg = base;
      cfg.lambda = cell.lambda;
      cfg.seed = cell.seed;
      auto trained = train_knowman(corpus, cfg);
      const auto r = xpasc(corpus, trained.model, matrices, 1.0);
      cell.xpasc = r.score;
      cell.task_metric = trained.task_metric;
    } catch (const std::exception& e) {
      cell.error = e.what();
      cell.xpasc.reset();
      cell.task_metric.reset();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(report.cells.size())));
  if (workers <= 1) {
    for (auto& cell : report.cells) run_cell(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < report.cells.size(); i = next++) run_cell(report.cells[i]);
      });
    }
  }

  std::vector<double> xs;
  std::vector<double> ys;
  for (double lambda : lambdas) {
    if (std::any_of(report.per_lambda.begin(), report.per_lambda.end(),
                    [&](const LambdaSummary& s) { return s.lambda == lambda; })) {
      continue;
    }
    LambdaSummary s;
    s.lambda = lambda;
    double sum_x = 0.0;
    double sum_m = 0.0;
    for (const auto& cell : report.cells) {
      if (cell.lambda != lambda || cell.error) continue;
      sum_x += *cell.xpasc;
      sum_m += *cell.task_metric;
      ++s.succeeded;
    }
    if (s.succeeded > 0) {
      s.mean_xpasc = sum_x / static_cast<double>(s.succeeded);
      s.mean_task_metric = sum_m / static_cast<double>(s.succeeded);
      xs.push_back(lambda);
      ys.push_back(*s.mean_xpasc);
    }
    report.per_lambda.push_back(s);
  }
  report.spearman = spearman_correlation(xs, ys);
  return report;
}

namespace {

std::string number(double v) { return json(v).dump(); }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string sweep_to_csv(const SweepReport& report) {
  std::ostringstream out;
  out << "lambda,seed,xpasc,task_metric\n";
  for (const auto& c : report.cells) {
    out << number(c.lambda) << ',' << c.seed << ',' << (c.xpasc ? number(*c.xpasc) : "nan") << ','
        << (c.task_metric ? number(*c.task_metric) : "nan") << '\n';
  }
  return out.str();
}

std::string sweep_summary_to_json(const SweepReport& report) {
  json j;
  j["association_method"] = std::string(to_string(report.method));
  json per = json::array();
  for (const auto& s : report.per_lambda) {
    per.push_back({{"lambda", s.lambda},
                   {"succeeded", s.succeeded},
                   {"mean_xpasc", optional_number(s.mean_xpasc)},
                   {"mean_task_metric", optional_number(s.mean_task_metric)}});
  }
  j["per_lambda"] = std::move(per);
  j["spearman_lambda_xpasc"] = optional_number(report.spearman);
  json cells = json::array();
  for (const auto& c : report.cells) {
    json cell{{"lambda", c.lambda},
              {"seed", c.seed},
              {"xpasc", optional_number(c.xpasc)},
              {"task_metric", optional_number(c.task_metric)},
              {"status", c.error ? "failed" : "ok"}};
    if (c.error) cell["error"] = *c.error;
    cells.push_back(std::move(cell));
  }
  j["cells"] = std::move(cells);
  return j.dump(1);
}

}  // namespace xpasc
