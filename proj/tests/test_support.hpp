#pragma once

// Independent oracles and generators shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwa/data_model.hpp"
#include "mwa/embeddings.hpp"
#include "mwa/model.hpp"
#include "mwa/score_tables.hpp"

namespace mwa::testing {

// Written out directly from the bucket table rather than reusing bucketize().
inline int oracle_bucket(int prev_end, const SpanLabel& label) {
  if (!label) return 14;
  if (prev_end < 0) return 13;
  const int d = label->begin - prev_end;
  if (d <= -11) return 0;
  if (d <= -6) return 1;
  if (d <= -4) return 2;
  if (d == -3) return 3;
  if (d == -2) return 4;
  if (d == -1) return 5;
  if (d == 0) return 6;
  if (d == 1) return 7;
  if (d == 2) return 8;
  if (d == 3) return 9;
  if (d <= 5) return 10;
  if (d <= 10) return 11;
  return 12;
}

/// Every valid span alignment sequence for lengths (n, m) and maximum span D.
inline std::vector<SpanAlignmentSequence> enumerate_sequences(int n, int m, int max_span) {
  std::vector<SpanAlignmentSequence> out;
  SpanAlignmentSequence current;
  std::function<void(int)> rec = [&](int begin) {
    if (begin == n) {
      out.push_back(current);
      return;
    }
    for (int len = 1; len <= max_span && begin + len <= n; ++len) {
      const Span src{begin, begin + len - 1};
      for (int tb = 0; tb < m; ++tb) {
        for (int tl = 1; tl <= max_span && tb + tl <= m; ++tl) {
          current.push_back({src, Span{tb, tb + tl - 1}});
          rec(begin + len);
          current.pop_back();
        }
      }
      if (len == 1) {
        current.push_back({src, std::nullopt});
        rec(begin + 1);
        current.pop_back();
      }
    }
  };
  rec(0);
  return out;
}

/// Score of a sequence from raw tables, with an optional per-word Hamming cost.
inline double oracle_score(const ScoreTables& tables, const SpanAlignmentSequence& seq,
                           const std::vector<SpanLabel>* gold_words = nullptr, double cost_scale = 0.0) {
  double total = 0.0;
  int prev_end = -1;
  for (const auto& item : seq) {
    const int s = tables.source_spans.index_of(item.source);
    const int l = item.label ? tables.target_spans.index_of(*item.label) : tables.null_label();
    total += tables.upsilon(s, l) + tables.tau[oracle_bucket(prev_end, item.label)];
    if (gold_words) {
      for (int w = item.source.begin; w <= item.source.end; ++w) {
        if ((*gold_words)[w] != item.label) total += cost_scale;
      }
    }
    if (item.label) prev_end = item.label->end;
  }
  return total;
}

inline double oracle_log_sum_exp(const std::vector<double>& xs) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double x : xs) peak = std::max(peak, x);
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - peak);
  return peak + std::log(sum);
}

inline ScoreTables random_tables(std::mt19937_64& rng, int n, int m, int max_span, double scale = 2.0) {
  std::normal_distribution<double> normal(0.0, scale);
  ScoreTables t(n, m, max_span);
  for (Eigen::Index k = 0; k < t.upsilon.size(); ++k) t.upsilon.data()[k] = normal(rng);
  for (double& v : t.tau) v = normal(rng);
  return t;
}

inline std::vector<std::string> random_tokens(std::mt19937_64& rng, int length, int vocab) {
  std::uniform_int_distribution<int> pick(0, vocab - 1);
  std::vector<std::string> out;
  for (int k = 0; k < length; ++k) out.push_back("w" + std::to_string(pick(rng)));
  return out;
}

/// Random pair with random sure/poss annotations (each cell sure w.p. p_sure, else poss w.p. p_poss).
inline SentencePair random_pair(std::mt19937_64& rng, int n, int m, double p_sure = 0.3, double p_poss = 0.1,
                                int vocab = 6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SentencePair pair;
  pair.id = "r" + std::to_string(rng() % 1000000);
  pair.source_tokens = random_tokens(rng, n, vocab);
  pair.target_tokens = random_tokens(rng, m, vocab);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double r = u(rng);
      if (r < p_sure) pair.sure.emplace(i, j);
      else if (r < p_sure + p_poss) pair.poss.emplace(i, j);
    }
  }
  return pair;
}

inline WordPairAlignment random_alignment(std::mt19937_64& rng, int n, int m, double density) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  WordPairAlignment out;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      if (u(rng) < density) out.emplace(i, j);
    }
  }
  return out;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index k = 0; k < out.size(); ++k) out.data()[k] = normal(rng);
  return out;
}

/// Randomizes every parameter (so gradients are exercised away from init symmetries).
inline void randomize(ModelParameters& params, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& t : params.tensors()) {
    for (Eigen::Index e = 0; e < t.size(); ++e) t.data[e] = normal(rng);
  }
  for (Eigen::Index h = 0; h < params.prelu_slope.size(); ++h) params.prelu_slope(h) = 0.1 + 0.3 * std::abs(normal(rng));
  for (Eigen::Index k = 0; k < params.ln_gain.size(); ++k) params.ln_gain(k) = 1.0 + 0.3 * normal(rng);
}

struct GradientMismatch {
  std::string tensor;
  Eigen::Index element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central differences on every parameter element; returns the elements outside
/// |analytic - numeric| <= rel_tol * max(1, |numeric|).
/// The loss has kinks (PReLU, |hs - ht|). When the forward and backward one-sided
/// differences disagree, a kink lies inside the step, so the step is shrunk (down to
/// step / 1000) until the function is locally smooth; the tolerance itself never changes.
inline std::vector<GradientMismatch> check_gradients(ModelParameters params, const ModelParameters& analytic,
                                                     const std::function<double(const ModelParameters&)>& loss,
                                                     double step = 1e-4, double rel_tol = 1e-4) {
  std::vector<GradientMismatch> out;
  const double center = loss(params);
  auto refs = params.tensors();
  const auto grad_refs = analytic.tensors();
  for (std::size_t k = 0; k < refs.size(); ++k) {
    for (Eigen::Index e = 0; e < refs[k].size(); ++e) {
      double& theta = refs[k].data[e];
      const double saved = theta;
      double numeric = 0.0;
      for (double h = step; h >= step / 1000.0 * 0.999; h /= 10.0) {
        theta = saved + h;
        const double up = loss(params);
        theta = saved - h;
        const double down = loss(params);
        theta = saved;
        numeric = (up - down) / (2.0 * h);
        const double one_sided_gap = std::abs((up - center) / h - (center - down) / h);
        if (one_sided_gap <= rel_tol * std::max(1.0, std::abs(numeric))) break;
      }
      const double a = grad_refs[k].data[e];
      if (!(std::abs(a - numeric) <= rel_tol * std::max(1.0, std::abs(numeric)))) {
        out.push_back({refs[k].name, e, a, numeric});
      }
    }
  }
  return out;
}

/// Static store over the given vocabulary with random vectors.
inline EmbeddingStore random_static_store(std::mt19937_64& rng, const std::vector<std::string>& vocab, int dim,
                                          double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::unordered_map<std::string, Eigen::VectorXd> table;
  for (const auto& w : vocab) {
    Eigen::VectorXd v(dim);
    for (int k = 0; k < dim; ++k) v(k) = normal(rng);
    table[w] = v;
  }
  return EmbeddingStore::from_static(dim, std::move(table));
}

/// Synthetic paraphrase pairs: each source word is copied, swapped for a fixed synonym,
/// expanded to a two-word phrase or dropped, and extra target words are sometimes inserted.
/// Gold sure links follow the construction; nothing is possible.
inline std::vector<SentencePair> synthetic_corpus(std::mt19937_64& rng, int count, int vocab = 12,
                                                  int min_length = 3, int max_length = 6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> length(min_length, max_length);
  std::vector<SentencePair> out;
  for (int p = 0; p < count; ++p) {
    SentencePair pair;
    pair.id = "syn" + std::to_string(p);
    pair.source_tokens = random_tokens(rng, length(rng), vocab);
    for (int i = 0; i < pair.source_length(); ++i) {
      const std::string& w = pair.source_tokens[i];
      const double r = u(rng);
      const int j = pair.target_length();
      if (r < 0.6) {
        pair.target_tokens.push_back(w);
        pair.sure.emplace(i, j);
      } else if (r < 0.75) {
        pair.target_tokens.push_back("syn_" + w);
        pair.sure.emplace(i, j);
      } else if (r < 0.85) {
        pair.target_tokens.push_back("pre_" + w);
        pair.target_tokens.push_back("post_" + w);
        pair.sure.emplace(i, j);
        pair.sure.emplace(i, j + 1);
      }
      if (u(rng) < 0.1) pair.target_tokens.push_back("filler");
    }
    if (pair.target_tokens.empty()) pair.target_tokens.push_back("filler");
    out.push_back(std::move(pair));
  }
  return out;
}

/// Every token of `corpus`, sorted and deduplicated.
inline std::vector<std::string> vocabulary(const std::vector<SentencePair>& corpus) {
  std::vector<std::string> out;
  for (const auto& pair : corpus) {
    out.insert(out.end(), pair.source_tokens.begin(), pair.source_tokens.end());
    out.insert(out.end(), pair.target_tokens.begin(), pair.target_tokens.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace mwa::testing
