#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mwa/errors.hpp"

namespace mwa {

/// (source index, target index), both 0-based.
using TokenPair = std::pair<int, int>;

/// Word-level alignment: the currency of evaluation and symmetrization.
using WordPairAlignment = std::set<TokenPair>;

enum class Direction { kSourceToTarget, kTargetToSource };
enum class Setting { kSure, kSurePlusPoss };

/// Inclusive word interval [begin, end].
struct Span {
  int begin = 0;
  int end = 0;

  int length() const { return end - begin + 1; }
  bool contains(int index) const { return begin <= index && index <= end; }

  friend auto operator<=>(const Span&, const Span&) = default;
};

/// A target span, or NULL when the source span is aligned to nothing.
using SpanLabel = std::optional<Span>;

struct SpanAssignment {
  Span source;
  SpanLabel label;

  friend bool operator==(const SpanAssignment&, const SpanAssignment&) = default;
};

/// Segmentation of the source sentence into labeled spans (the CRF label sequence).
using SpanAlignmentSequence = std::vector<SpanAssignment>;

struct SentencePair {
  std::string id;
  std::vector<std::string> source_tokens;
  std::vector<std::string> target_tokens;
  WordPairAlignment sure;
  WordPairAlignment poss;

  int source_length() const { return static_cast<int>(source_tokens.size()); }
  int target_length() const { return static_cast<int>(target_tokens.size()); }
};

inline const char* to_string(Setting setting) {
  return setting == Setting::kSure ? "sure" : "sure+poss";
}

inline Setting parse_setting(const std::string& text) {
  if (text == "sure" || text == "Sure") return Setting::kSure;
  if (text == "sure+poss" || text == "SurePlusPoss" || text == "sure_plus_poss") {
    return Setting::kSurePlusPoss;
  }
  throw ValidationError("unknown setting '" + text + "' (expected sure or sure+poss)");
}

/// Throws ValidationError naming the record when an invariant is broken.
inline void validate(const SentencePair& pair) {
  if (pair.source_tokens.empty() || pair.target_tokens.empty()) {
    throw ValidationError("record '" + pair.id + "': empty token sequence");
  }
  auto check = [&](const WordPairAlignment& pairs, const char* field) {
    for (const auto& [i, j] : pairs) {
      if (i < 0 || i >= pair.source_length() || j < 0 || j >= pair.target_length()) {
        throw ValidationError("record '" + pair.id + "': " + field + " pair (" + std::to_string(i) +
                              "," + std::to_string(j) + ") out of range for lengths " +
                              std::to_string(pair.source_length()) + "x" +
                              std::to_string(pair.target_length()));
      }
    }
  };
  check(pair.sure, "sure");
  check(pair.poss, "poss");
  for (const auto& p : pair.poss) {
    if (pair.sure.contains(p)) {
      throw ValidationError("record '" + pair.id + "': pair (" + std::to_string(p.first) + "," +
                            std::to_string(p.second) + ") is both sure and poss");
    }
  }
}

inline WordPairAlignment gold_pairs(const SentencePair& pair, Setting setting) {
  WordPairAlignment gold = pair.sure;
  if (setting == Setting::kSurePlusPoss) gold.insert(pair.poss.begin(), pair.poss.end());
  return gold;
}

inline WordPairAlignment transpose(const WordPairAlignment& alignment) {
  WordPairAlignment out;
  for (const auto& [i, j] : alignment) out.emplace(j, i);
  return out;
}

/// The pair seen from `direction`: target-to-source swaps the sentences and every index pair.
inline SentencePair oriented(const SentencePair& pair, Direction direction) {
  if (direction == Direction::kSourceToTarget) return pair;
  return SentencePair{pair.id, pair.target_tokens, pair.source_tokens, transpose(pair.sure),
                      transpose(pair.poss)};
}

/// Checks tiling, the NULL-length rule and the maximum span length.
inline bool is_valid_sequence(const SpanAlignmentSequence& seq, int source_length,
                              int target_length, int max_span) {
  int next = 0;
  for (const auto& item : seq) {
    if (item.source.begin != next || item.source.end < item.source.begin) return false;
    if (item.source.length() > max_span) return false;
    if (!item.label) {
      if (item.source.length() != 1) return false;
    } else {
      const Span& t = *item.label;
      if (t.begin < 0 || t.end < t.begin || t.end >= target_length || t.length() > max_span) {
        return false;
      }
    }
    next = item.source.end + 1;
  }
  return next == source_length;
}

inline WordPairAlignment to_word_pairs(const SpanAlignmentSequence& seq) {
  WordPairAlignment out;
  for (const auto& item : seq) {
    if (!item.label) continue;
    for (int i = item.source.begin; i <= item.source.end; ++i) {
      for (int j = item.label->begin; j <= item.label->end; ++j) out.emplace(i, j);
    }
  }
  return out;
}

/// Gold span sequence for one orientation, plus the per-word canonical intervals the
/// Hamming cost compares against.
struct GoldDerivation {
  SpanAlignmentSequence sequence;
  std::vector<SpanLabel> word_labels;
  int clipped = 0;
};

namespace detail {

// Longest contiguous run of a sorted index list; ties go to the leftmost run.
inline Span longest_run(const std::vector<int>& sorted) {
  Span best{sorted.front(), sorted.front()};
  Span current = best;
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    if (sorted[k] == current.end + 1) {
      current.end = sorted[k];
    } else {
      current = Span{sorted[k], sorted[k]};
    }
    if (current.length() > best.length()) best = current;
  }
  return best;
}

}  // namespace detail

/// Deterministic conversion of token-pair annotations into a trainable span sequence.
/// Non-contiguous or over-long target sets are clipped to their leftmost longest run
/// (truncated to `max_span`), and each clip is counted.
inline GoldDerivation derive_gold_spans(const SentencePair& pair, Direction direction,
                                        Setting setting, int max_span) {
  if (max_span < 1) throw ValidationError("maximum span length must be >= 1");
  const SentencePair view = oriented(pair, direction);
  const WordPairAlignment gold = gold_pairs(view, setting);
  const int n = view.source_length();

  std::vector<std::vector<int>> targets(n);
  for (const auto& [i, j] : gold) targets[i].push_back(j);  // std::set keeps j sorted per i

  GoldDerivation out;
  out.word_labels.resize(n);
  for (int w = 0; w < n; ++w) {
    const auto& t = targets[w];
    if (t.empty()) continue;
    const bool contiguous = t.back() - t.front() + 1 == static_cast<int>(t.size());
    if (contiguous && static_cast<int>(t.size()) <= max_span) {
      out.word_labels[w] = Span{t.front(), t.back()};
      continue;
    }
    Span run = detail::longest_run(t);
    run.end = std::min(run.end, run.begin + max_span - 1);
    out.word_labels[w] = run;
    ++out.clipped;
  }

  for (int w = 0; w < n;) {
    if (!out.word_labels[w]) {
      out.sequence.push_back({Span{w, w}, std::nullopt});
      ++w;
      continue;
    }
    int run_end = w;
    while (run_end + 1 < n && out.word_labels[run_end + 1] == out.word_labels[w]) ++run_end;
    for (int b = w; b <= run_end; b += max_span) {
      out.sequence.push_back({Span{b, std::min(run_end, b + max_span - 1)}, out.word_labels[w]});
    }
    w = run_end + 1;
  }
  return out;
}

/// A connected component of the bipartite alignment graph.
struct AlignmentComponent {
  std::set<int> source;
  std::set<int> target;
  std::size_t edges = 0;

  friend bool operator==(const AlignmentComponent&, const AlignmentComponent&) = default;
};

/// Connected components, ordered by their smallest source index.
inline std::vector<AlignmentComponent> components(const WordPairAlignment& alignment) {
  // Union-find over source nodes (even ids) and target nodes (odd ids).
  std::map<long long, long long> parent;
  auto node = [](int index, bool is_target) { return 2LL * index + (is_target ? 1 : 0); };
  auto find = [&](long long x) {
    auto it = parent.try_emplace(x, x).first;
    while (it->second != it->first) {
      auto up = parent.find(it->second);
      it->second = up->second;
      it = up;
    }
    return it->first;
  };
  for (const auto& [i, j] : alignment) {
    const long long a = find(node(i, false));
    const long long b = find(node(j, true));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }

  std::map<long long, AlignmentComponent> by_root;
  for (const auto& [i, j] : alignment) {
    auto& c = by_root[find(node(i, false))];
    c.source.insert(i);
    c.target.insert(j);
    ++c.edges;
  }
  std::vector<AlignmentComponent> out;
  out.reserve(by_root.size());
  for (auto& [root, c] : by_root) out.push_back(std::move(c));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return *a.source.begin() < *b.source.begin();
  });
  return out;
}

}  // namespace mwa
