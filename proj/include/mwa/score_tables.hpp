#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "mwa/data_model.hpp"

namespace mwa {

inline constexpr int kDistanceBuckets = 13;
inline constexpr int kStartBucket = 13;
inline constexpr int kToNullBucket = 14;
inline constexpr int kNumBuckets = 15;

/// Right-closed bucket boundaries for the target-side jump distance.
inline constexpr std::array<int, 12> kBucketBoundaries = {-11, -6, -4, -3, -2, -1, 0, 1, 2, 3, 5, 10};

/// Bucket k covers (boundary[k-1], boundary[k]]; bucket 0 is d <= -11, bucket 12 is d > 10.
constexpr int bucketize(int distance) {
  int bucket = 0;
  while (bucket < static_cast<int>(kBucketBoundaries.size()) && distance > kBucketBoundaries[bucket]) {
    ++bucket;
  }
  return bucket;
}

/// The "carried" lattice state: end of the most recent non-NULL target span, or START.
inline constexpr int kStartState = -1;

/// Bucket for a transition into `label` when the last non-NULL target span ended at `prev_end`.
inline int transition_bucket(int prev_end, const SpanLabel& label) {
  if (!label) return kToNullBucket;
  if (prev_end == kStartState) return kStartBucket;
  return bucketize(label->begin - prev_end);
}

/// Enumerates all spans of length <= max_span over a sentence of `length` words,
/// ordered by (begin, length).
class SpanIndex {
 public:
  SpanIndex() = default;
  SpanIndex(int length, int max_span) : length_(length), max_span_(max_span) {
    lookup_.assign(static_cast<std::size_t>(length) * max_span, -1);
    for (int b = 0; b < length; ++b) {
      for (int len = 1; len <= max_span && b + len <= length; ++len) {
        lookup_[static_cast<std::size_t>(b) * max_span + (len - 1)] = static_cast<int>(spans_.size());
        spans_.push_back(Span{b, b + len - 1});
      }
    }
  }

  int length() const { return length_; }
  int max_span() const { return max_span_; }
  int size() const { return static_cast<int>(spans_.size()); }
  const Span& operator[](int index) const { return spans_[index]; }
  const std::vector<Span>& spans() const { return spans_; }

  /// -1 when the span is out of range or longer than max_span.
  int index_of(const Span& span) const {
    const int len = span.length();
    if (span.begin < 0 || span.end >= length_ || len < 1 || len > max_span_) return -1;
    return lookup_[static_cast<std::size_t>(span.begin) * max_span_ + (len - 1)];
  }

 private:
  int length_ = 0;
  int max_span_ = 1;
  std::vector<Span> spans_;
  std::vector<int> lookup_;
};

/// All lattice potentials for one oriented sentence pair.
///   upsilon(s, l): source span s with label l, where l < target_spans.size() is a target
///   span and l == null_label() is NULL.
///   tau[k]: transition score for bucket k.
struct ScoreTables {
  SpanIndex source_spans;
  SpanIndex target_spans;
  Eigen::MatrixXd upsilon;
  std::array<double, kNumBuckets> tau{};

  ScoreTables() = default;
  ScoreTables(int source_length, int target_length, int max_span)
      : source_spans(source_length, max_span),
        target_spans(target_length, max_span),
        upsilon(Eigen::MatrixXd::Zero(source_spans.size(), target_spans.size() + 1)) {}

  int source_length() const { return source_spans.length(); }
  int target_length() const { return target_spans.length(); }
  int max_span() const { return source_spans.max_span(); }
  int null_label() const { return target_spans.size(); }
  int label_count() const { return target_spans.size() + 1; }

  SpanLabel label(int index) const {
    if (index == null_label()) return std::nullopt;
    return target_spans[index];
  }

  int label_index(const SpanLabel& label) const {
    return label ? target_spans.index_of(*label) : null_label();
  }
};

}  // namespace mwa
