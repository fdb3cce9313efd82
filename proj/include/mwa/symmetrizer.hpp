#pragma once

#include <algorithm>
#include <functional>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "mwa/data_model.hpp"
#include "mwa/errors.hpp"

namespace mwa {

enum class MergeStrategy { kIntersection, kUnion, kGrowDiag, kBidiAvg, kNone };

inline MergeStrategy parse_merge_strategy(const std::string& name) {
  if (name == "intersection") return MergeStrategy::kIntersection;
  if (name == "union") return MergeStrategy::kUnion;
  if (name == "grow-diag") return MergeStrategy::kGrowDiag;
  if (name == "bidi-avg") return MergeStrategy::kBidiAvg;
  if (name == "none") return MergeStrategy::kNone;
  throw ValidationError("unknown merge strategy '" + name + "'");
}

inline const char* to_string(MergeStrategy strategy) {
  switch (strategy) {
    case MergeStrategy::kIntersection: return "intersection";
    case MergeStrategy::kUnion: return "union";
    case MergeStrategy::kGrowDiag: return "grow-diag";
    case MergeStrategy::kBidiAvg: return "bidi-avg";
    case MergeStrategy::kNone: return "none";
  }
  return "?";
}

// Both arguments are in (source, target) orientation throughout.

inline WordPairAlignment intersection(const WordPairAlignment& fwd, const WordPairAlignment& bwd) {
  WordPairAlignment out;
  std::set_intersection(fwd.begin(), fwd.end(), bwd.begin(), bwd.end(), std::inserter(out, out.end()));
  return out;
}

inline WordPairAlignment union_of(const WordPairAlignment& fwd, const WordPairAlignment& bwd) {
  WordPairAlignment out = fwd;
  out.insert(bwd.begin(), bwd.end());
  return out;
}

/// Grows the intersection with union points that touch an accepted point (8-neighborhood)
/// and cover a still-unaligned source or target word. Candidates are scanned row-major and
/// the scan repeats until nothing changes. No final step.
inline WordPairAlignment grow_diag(const WordPairAlignment& fwd, const WordPairAlignment& bwd) {
  WordPairAlignment accepted = intersection(fwd, bwd);
  const WordPairAlignment candidates = union_of(fwd, bwd);
  std::set<int> source_aligned;
  std::set<int> target_aligned;
  for (const auto& [i, j] : accepted) {
    source_aligned.insert(i);
    target_aligned.insert(j);
  }
  auto has_accepted_neighbor = [&](int i, int j) {
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        if ((di != 0 || dj != 0) && accepted.contains({i + di, j + dj})) return true;
      }
    }
    return false;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [i, j] : candidates) {
      if (accepted.contains({i, j})) continue;
      if (source_aligned.contains(i) && target_aligned.contains(j)) continue;
      if (!has_accepted_neighbor(i, j)) continue;
      accepted.emplace(i, j);
      source_aligned.insert(i);
      target_aligned.insert(j);
      changed = true;
    }
  }
  return accepted;
}

/// Accept (x, y) iff the mean of the two directional posteriors reaches `threshold`.
inline WordPairAlignment bidi_avg(const Eigen::MatrixXd& fwd_posteriors,
                                  const Eigen::MatrixXd& bwd_posteriors, double threshold) {
  if (fwd_posteriors.rows() != bwd_posteriors.rows() || fwd_posteriors.cols() != bwd_posteriors.cols()) {
    throw ValidationError("bidi-avg: posterior matrices differ in shape");
  }
  WordPairAlignment out;
  for (Eigen::Index x = 0; x < fwd_posteriors.rows(); ++x) {
    for (Eigen::Index y = 0; y < fwd_posteriors.cols(); ++y) {
      if ((fwd_posteriors(x, y) + bwd_posteriors(x, y)) / 2.0 >= threshold) {
        out.emplace(static_cast<int>(x), static_cast<int>(y));
      }
    }
  }
  return out;
}

/// Set-based merges; bidi-avg needs posteriors and is handled by the caller.
inline WordPairAlignment merge(MergeStrategy strategy, const WordPairAlignment& fwd,
                               const WordPairAlignment& bwd) {
  switch (strategy) {
    case MergeStrategy::kIntersection: return intersection(fwd, bwd);
    case MergeStrategy::kUnion: return union_of(fwd, bwd);
    case MergeStrategy::kGrowDiag: return grow_diag(fwd, bwd);
    case MergeStrategy::kNone: return fwd;
    case MergeStrategy::kBidiAvg: break;
  }
  throw ValidationError("bidi-avg merging needs posterior matrices");
}

/// similarity(source span, target span) in [0, 1]; target spans may be of any length.
using SimilarityFn = std::function<double(const Span&, const Span&)>;

/// Grows each decoded non-NULL target span one word at a time, first rightwards then
/// leftwards, while the similarity stays >= threshold and the next target word is unclaimed.
/// Returns the decoded word pairs plus every pair the extensions add.
inline WordPairAlignment extend_phrases(const SpanAlignmentSequence& decoded, int target_length,
                                        const SimilarityFn& similarity, double threshold) {
  WordPairAlignment out = to_word_pairs(decoded);
  std::set<int> claimed;
  for (const auto& pair : out) claimed.insert(pair.second);

  for (const auto& item : decoded) {
    if (!item.label) continue;
    Span target = *item.label;
    while (target.end + 1 < target_length && !claimed.contains(target.end + 1) &&
           similarity(item.source, Span{target.begin, target.end + 1}) >= threshold) {
      claimed.insert(++target.end);
    }
    while (target.begin > 0 && !claimed.contains(target.begin - 1) &&
           similarity(item.source, Span{target.begin - 1, target.end}) >= threshold) {
      claimed.insert(--target.begin);
    }
    for (int i = item.source.begin; i <= item.source.end; ++i) {
      for (int j = target.begin; j <= target.end; ++j) out.emplace(i, j);
    }
  }
  return out;
}

}  // namespace mwa
