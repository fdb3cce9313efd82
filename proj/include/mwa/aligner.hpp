#pragma once

#include <optional>

#include "mwa/data_model.hpp"
#include "mwa/embeddings.hpp"
#include "mwa/model.hpp"
#include "mwa/scorer.hpp"
#include "mwa/semicrf.hpp"
#include "mwa/symmetrizer.hpp"

namespace mwa {

struct AlignOptions {
  MergeStrategy merge = MergeStrategy::kIntersection;
  double bidi_threshold = 0.4;
  std::optional<double> extend_threshold;  // phrase extension is off when unset
};

struct PairAlignment {
  SpanAlignmentSequence forward;   // source -> target
  SpanAlignmentSequence backward;  // target -> source, in its own orientation
  WordPairAlignment forward_pairs;
  WordPairAlignment backward_pairs;  // transposed into (source, target)
  WordPairAlignment merged;
};

/// Viterbi in both directions with shared parameters, then merge and optional extension.
inline PairAlignment align_pair(const ModelParameters& params, const SentencePair& pair,
                                const PairVectors& vectors, const AlignOptions& options) {
  const PairEncoding encoding = encode_pair(params, vectors);
  const ScoreTables fwd_tables = build_score_tables(params, encoding, Direction::kSourceToTarget);
  const ScoreTables bwd_tables = build_score_tables(params, encoding, Direction::kTargetToSource);

  PairAlignment out;
  out.forward = viterbi(fwd_tables).sequence;
  out.backward = viterbi(bwd_tables).sequence;
  out.forward_pairs = to_word_pairs(out.forward);
  out.backward_pairs = transpose(to_word_pairs(out.backward));

  if (options.merge == MergeStrategy::kBidiAvg) {
    const Eigen::MatrixXd fwd_post = word_pair_posteriors(fwd_tables);
    const Eigen::MatrixXd bwd_post = word_pair_posteriors(bwd_tables).transpose();
    out.merged = bidi_avg(fwd_post, bwd_post, options.bidi_threshold);
  } else {
    out.merged = merge(options.merge, out.forward_pairs, out.backward_pairs);
  }

  // Extensions only add pairs: whatever each direction's extension grows beyond its own
  // decoded pairs is unioned into the merged result.
  if (options.extend_threshold) {
    const double threshold = *options.extend_threshold;
    const SpanSimilarity fwd_sim(params, vectors.source, vectors.target);
    for (const auto& p : extend_phrases(out.forward, pair.target_length(), std::cref(fwd_sim), threshold)) {
      if (!out.forward_pairs.contains(p)) out.merged.insert(p);
    }
    if (options.merge != MergeStrategy::kNone) {
      const SpanSimilarity bwd_sim(params, vectors.target, vectors.source);
      for (const auto& [j, i] :
           extend_phrases(out.backward, pair.source_length(), std::cref(bwd_sim), threshold)) {
        if (!out.backward_pairs.contains({i, j})) out.merged.emplace(i, j);
      }
    }
  }
  return out;
}

inline PairAlignment align_pair(const ModelParameters& params, const SentencePair& pair,
                                const EmbeddingStore& store, const AlignOptions& options) {
  return align_pair(params, pair, vectors_for(pair, store), options);
}

}  // namespace mwa
