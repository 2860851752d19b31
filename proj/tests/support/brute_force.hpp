#pragma once

// Direct evaluations from raw instance enumeration, written without the
// library's count tables so they can serve as reference values.

#include "xpasc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace xpasc::testing {

struct BruteTable {
  // observed[f][z]: instances containing feature f and carrying label z
  // (class table) or matched by LF z (LF table).
  std::vector<std::vector<double>> observed;
};

inline bool has_token(const Instance& inst, const std::string& f) {
  return std::find(inst.tokens.begin(), inst.tokens.end(), f) != inst.tokens.end();
}

inline bool has_lf(const Instance& inst, int l) {
  return std::find(inst.lf_matches.begin(), inst.lf_matches.end(), l) != inst.lf_matches.end();
}

inline BruteTable brute_class_table(const Corpus& corpus) {
  const auto& feats = corpus.vocabulary().features();
  BruteTable t;
  t.observed.assign(feats.size(), std::vector<double>(static_cast<std::size_t>(corpus.num_classes()), 0.0));
  for (std::size_t f = 0; f < feats.size(); ++f) {
    for (int c = 0; c < corpus.num_classes(); ++c) {
      for (const Instance& inst : corpus.instances()) {
        if (inst.weak_label == c && has_token(inst, feats[f])) t.observed[f][static_cast<std::size_t>(c)] += 1;
      }
    }
  }
  return t;
}

inline BruteTable brute_lf_table(const Corpus& corpus) {
  const auto& feats = corpus.vocabulary().features();
  BruteTable t;
  t.observed.assign(feats.size(), std::vector<double>(static_cast<std::size_t>(corpus.num_lfs()), 0.0));
  for (std::size_t f = 0; f < feats.size(); ++f) {
    for (int l = 0; l < corpus.num_lfs(); ++l) {
      for (const Instance& inst : corpus.instances()) {
        if (has_lf(inst, l) && has_token(inst, feats[f])) t.observed[f][static_cast<std::size_t>(l)] += 1;
      }
    }
  }
  return t;
}

struct Margins {
  std::vector<double> row, col;
  double total = 0;
};

inline Margins margins(const BruteTable& t) {
  Margins m;
  m.row.assign(t.observed.size(), 0.0);
  m.col.assign(t.observed.empty() ? 0 : t.observed[0].size(), 0.0);
  for (std::size_t f = 0; f < t.observed.size(); ++f) {
    for (std::size_t z = 0; z < t.observed[f].size(); ++z) {
      m.row[f] += t.observed[f][z];
      m.col[z] += t.observed[f][z];
      m.total += t.observed[f][z];
    }
  }
  return m;
}

// Returns [z][f], matching the library's label-major matrices.
inline std::vector<std::vector<double>> brute_chi2(const BruteTable& t) {
  const Margins m = margins(t);
  std::vector<std::vector<double>> out(m.col.size(), std::vector<double>(m.row.size(), 0.0));
  for (std::size_t z = 0; z < m.col.size(); ++z) {
    for (std::size_t f = 0; f < m.row.size(); ++f) {
      const double e = m.total > 0 ? m.row[f] * m.col[z] / m.total : 0.0;
      out[z][f] = e > 0 ? std::pow(t.observed[f][z] - e, 2) / e : 0.0;
    }
  }
  return out;
}

inline std::vector<std::vector<double>> brute_ppmi(const BruteTable& t) {
  const Margins m = margins(t);
  std::vector<std::vector<double>> out(m.col.size(), std::vector<double>(m.row.size(), 0.0));
  for (std::size_t z = 0; z < m.col.size(); ++z) {
    for (std::size_t f = 0; f < m.row.size(); ++f) {
      if (t.observed[f][z] == 0) continue;
      const double pfz = t.observed[f][z] / m.total;
      const double pf = m.row[f] / m.total;
      const double pz = m.col[z] / m.total;
      out[z][f] = std::max(0.0, std::log(pfz / (pf * pz)));
    }
  }
  return out;
}

}  // namespace xpasc::testing
