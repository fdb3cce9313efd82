#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mwa/data_model.hpp"
#include "mwa/errors.hpp"
#include "mwa/score_tables.hpp"

// Semi-Markov lattice over one oriented sentence pair.
//
// A lattice state after consuming e source words is the end index of the most recent
// non-NULL target span (or START). An edge consumes a source span [b, e) of length <= D
// and assigns it a label: a target span, which moves the state to that span's end, or
// NULL (length-1 spans only), which carries the state unchanged. Edge weight is
// upsilon(span, label) + tau(bucket(state, label)), plus the Hamming cost when training.
namespace mwa {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

/// Per-(source span, label) Hamming cost against the gold word-level intervals.
struct CostTable {
  Eigen::MatrixXd cost;  // same shape as ScoreTables::upsilon
};

/// cost_scale x (number of words in `span` whose gold interval differs from `label`).
inline double hamming_cost(const Span& span, const SpanLabel& label,
                           const std::vector<SpanLabel>& gold_word_labels, double cost_scale) {
  int mismatches = 0;
  for (int w = span.begin; w <= span.end; ++w) {
    if (gold_word_labels[w] != label) ++mismatches;
  }
  return cost_scale * mismatches;
}

inline CostTable make_cost_table(const ScoreTables& tables, const std::vector<SpanLabel>& gold_word_labels,
                                 double cost_scale) {
  if (static_cast<int>(gold_word_labels.size()) != tables.source_length()) {
    throw ValidationError("gold word labels do not match the source length");
  }
  CostTable out{Eigen::MatrixXd::Zero(tables.source_spans.size(), tables.label_count())};
  for (int s = 0; s < tables.source_spans.size(); ++s) {
    for (int l = 0; l < tables.label_count(); ++l) {
      out.cost(s, l) = hamming_cost(tables.source_spans[s], tables.label(l), gold_word_labels, cost_scale);
    }
  }
  return out;
}

namespace detail {

inline void check_finite(const ScoreTables& tables) {
  if (!tables.upsilon.allFinite()) throw NumericError("non-finite span interaction score");
  for (double t : tables.tau) {
    if (!std::isfinite(t)) throw NumericError("non-finite transition score");
  }
}

// State index: target end 0..m-1, START = m.
inline int state_index(int prev_end, int target_length) {
  return prev_end == kStartState ? target_length : prev_end;
}

inline int prev_end_of(int state, int target_length) {
  return state == target_length ? kStartState : state;
}

// Calls visit(b, e, source_span_index, label_index) for every edge ending at e, in the
// order (span length, label, ...) used for Viterbi tie-breaking.
template <typename Visit>
void for_each_edge_ending_at(const ScoreTables& tables, int e, Visit&& visit) {
  const int max_len = std::min(tables.max_span(), e);
  for (int len = 1; len <= max_len; ++len) {
    const int b = e - len;
    const int s = tables.source_spans.index_of(Span{b, e - 1});
    for (int l = 0; l < tables.label_count(); ++l) {
      if (l == tables.null_label() && len != 1) continue;
      visit(b, s, l);
    }
  }
}

struct EdgeTarget {
  int state;
  int bucket;
};

inline EdgeTarget follow(const ScoreTables& tables, int state, int label) {
  const int m = tables.target_length();
  const SpanLabel lab = tables.label(label);
  const int bucket = transition_bucket(prev_end_of(state, m), lab);
  return {lab ? lab->end : state, bucket};
}

inline double edge_weight(const ScoreTables& tables, const CostTable* cost, int s, int l, int bucket) {
  double w = tables.upsilon(s, l) + tables.tau[bucket];
  if (cost) w += cost->cost(s, l);
  return w;
}

// alpha(e, state): log-sum of all prefixes covering [0, e) ending in `state`.
inline Eigen::MatrixXd forward_scores(const ScoreTables& tables, const CostTable* cost) {
  const int n = tables.source_length();
  const int m = tables.target_length();
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Constant(n + 1, m + 1, kNegInf);
  alpha(0, m) = 0.0;
  for (int e = 1; e <= n; ++e) {
    for_each_edge_ending_at(tables, e, [&](int b, int s, int l) {
      for (int p = 0; p <= m; ++p) {
        if (alpha(b, p) == kNegInf) continue;
        const EdgeTarget next = follow(tables, p, l);
        alpha(e, next.state) =
            log_add(alpha(e, next.state), alpha(b, p) + edge_weight(tables, cost, s, l, next.bucket));
      }
    });
  }
  return alpha;
}

// beta(b, state): log-sum of all suffixes covering [b, n) entered in `state`.
inline Eigen::MatrixXd backward_scores(const ScoreTables& tables, const CostTable* cost) {
  const int n = tables.source_length();
  const int m = tables.target_length();
  Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(n + 1, m + 1, kNegInf);
  beta.row(n).setZero();
  for (int e = n; e >= 1; --e) {
    // Edges ending at e feed beta at their begin; e descending keeps beta(e, .) final.
    for_each_edge_ending_at(tables, e, [&](int b, int s, int l) {
      for (int p = 0; p <= m; ++p) {
        const EdgeTarget next = follow(tables, p, l);
        if (beta(e, next.state) == kNegInf) continue;
        beta(b, p) = log_add(beta(b, p), edge_weight(tables, cost, s, l, next.bucket) + beta(e, next.state));
      }
    });
  }
  return beta;
}

}  // namespace detail

/// log of the sum over all valid span alignment sequences of exp(total score).
inline double log_partition(const ScoreTables& tables, const CostTable* cost = nullptr) {
  detail::check_finite(tables);
  const Eigen::MatrixXd alpha = detail::forward_scores(tables, cost);
  double z = kNegInf;
  for (int p = 0; p <= tables.target_length(); ++p) z = log_add(z, alpha(tables.source_length(), p));
  return z;
}

/// Total (cost-free) score of one sequence, walking transitions across NULL labels.
inline double sequence_score(const ScoreTables& tables, const SpanAlignmentSequence& seq) {
  double total = 0.0;
  int prev_end = kStartState;
  for (const auto& item : seq) {
    const int s = tables.source_spans.index_of(item.source);
    const int l = tables.label_index(item.label);
    if (s < 0 || l < 0) throw ValidationError("sequence item outside the lattice");
    total += tables.upsilon(s, l) + tables.tau[transition_bucket(prev_end, item.label)];
    if (item.label) prev_end = item.label->end;
  }
  return total;
}

struct ViterbiResult {
  SpanAlignmentSequence sequence;
  double score = kNegInf;
};

/// Best sequence (no cost term). Ties prefer the shorter source span, then a non-NULL
/// label, then the smaller target begin, then the shorter target span, then the smaller
/// predecessor state with START last.
inline ViterbiResult viterbi(const ScoreTables& tables) {
  detail::check_finite(tables);
  const int n = tables.source_length();
  const int m = tables.target_length();
  struct Back {
    int begin = -1;
    int state = -1;
    int span = -1;
    int label = -1;
  };
  Eigen::MatrixXd best = Eigen::MatrixXd::Constant(n + 1, m + 1, kNegInf);
  std::vector<Back> back(static_cast<std::size_t>(n + 1) * (m + 1));
  auto at = [&](int e, int p) -> Back& { return back[static_cast<std::size_t>(e) * (m + 1) + p]; };
  best(0, m) = 0.0;

  for (int e = 1; e <= n; ++e) {
    detail::for_each_edge_ending_at(tables, e, [&](int b, int s, int l) {
      for (int p = 0; p <= m; ++p) {
        if (best(b, p) == kNegInf) continue;
        const auto next = detail::follow(tables, p, l);
        const double candidate = best(b, p) + detail::edge_weight(tables, nullptr, s, l, next.bucket);
        if (candidate > best(e, next.state)) {
          best(e, next.state) = candidate;
          at(e, next.state) = Back{b, p, s, l};
        }
      }
    });
  }

  ViterbiResult result;
  int state = -1;
  for (int p = 0; p <= m; ++p) {
    if (best(n, p) > result.score) {
      result.score = best(n, p);
      state = p;
    }
  }
  for (int e = n; e > 0;) {
    const Back& bp = at(e, state);
    result.sequence.push_back({tables.source_spans[bp.span], tables.label(bp.label)});
    e = bp.begin;
    state = bp.state;
  }
  std::reverse(result.sequence.begin(), result.sequence.end());
  return result;
}

struct Marginals {
  double log_partition = kNegInf;
  Eigen::MatrixXd span_label;               // P(span with label appears), shape of upsilon
  std::array<double, kNumBuckets> bucket{};  // expected number of transitions per bucket
};

/// Forward-backward posteriors, optionally under cost-augmented scores.
inline Marginals marginals(const ScoreTables& tables, const CostTable* cost = nullptr) {
  detail::check_finite(tables);
  const int n = tables.source_length();
  const int m = tables.target_length();
  const Eigen::MatrixXd alpha = detail::forward_scores(tables, cost);
  const Eigen::MatrixXd beta = detail::backward_scores(tables, cost);

  Marginals out;
  for (int p = 0; p <= m; ++p) out.log_partition = log_add(out.log_partition, alpha(n, p));
  out.span_label = Eigen::MatrixXd::Zero(tables.source_spans.size(), tables.label_count());
  for (int e = 1; e <= n; ++e) {
    detail::for_each_edge_ending_at(tables, e, [&](int b, int s, int l) {
      for (int p = 0; p <= m; ++p) {
        if (alpha(b, p) == kNegInf) continue;
        const auto next = detail::follow(tables, p, l);
        if (beta(e, next.state) == kNegInf) continue;
        const double posterior = std::exp(alpha(b, p) + detail::edge_weight(tables, cost, s, l, next.bucket) +
                                          beta(e, next.state) - out.log_partition);
        out.span_label(s, l) += posterior;
        out.bucket[next.bucket] += posterior;
      }
    });
  }
  return out;
}

/// M(x, y) = posterior probability that source word x is aligned to target word y.
inline Eigen::MatrixXd word_pair_posteriors(const Marginals& post, const ScoreTables& tables) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(tables.source_length(), tables.target_length());
  for (int s = 0; s < tables.source_spans.size(); ++s) {
    const Span& src = tables.source_spans[s];
    for (int l = 0; l < tables.null_label(); ++l) {
      const double p = post.span_label(s, l);
      if (p == 0.0) continue;
      const Span& tgt = tables.target_spans[l];
      out.block(src.begin, tgt.begin, src.length(), tgt.length()).array() += p;
    }
  }
  return out;
}

inline Eigen::MatrixXd word_pair_posteriors(const ScoreTables& tables) {
  return word_pair_posteriors(marginals(tables), tables);
}

struct NllResult {
  double loss = 0.0;
  Eigen::MatrixXd d_upsilon;
  std::array<double, kNumBuckets> d_tau{};
};

/// Softmax-margin NLL of the gold sequence: log Z(scores + cost) - score(gold), with
/// gradients (cost-augmented posterior - gold indicator) on every table entry.
inline NllResult nll_and_score_grads(const ScoreTables& tables, const GoldDerivation& gold, double cost_scale) {
  if (!is_valid_sequence(gold.sequence, tables.source_length(), tables.target_length(), tables.max_span())) {
    throw ValidationError("gold sequence does not fit the lattice");
  }
  CostTable cost;
  const CostTable* cost_ptr = nullptr;
  if (cost_scale != 0.0) {
    cost = make_cost_table(tables, gold.word_labels, cost_scale);
    cost_ptr = &cost;
  }
  const Marginals post = marginals(tables, cost_ptr);

  NllResult out;
  out.loss = post.log_partition - sequence_score(tables, gold.sequence);
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
  out.d_upsilon = post.span_label;
  out.d_tau = post.bucket;
  int prev_end = kStartState;
  for (const auto& item : gold.sequence) {
    out.d_upsilon(tables.source_spans.index_of(item.source), tables.label_index(item.label)) -= 1.0;
    out.d_tau[transition_bucket(prev_end, item.label)] -= 1.0;
    if (item.label) prev_end = item.label->end;
  }
  return out;
}

}  // namespace mwa
