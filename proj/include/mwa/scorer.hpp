#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "mwa/data_model.hpp"
#include "mwa/embeddings.hpp"
#include "mwa/errors.hpp"
#include "mwa/model.hpp"
#include "mwa/score_tables.hpp"

namespace mwa {

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Span representations of one sentence, with the intermediates the backward pass needs.
struct SpanReps {
  SpanIndex index;
  Matrix reps;                     // spans x 3*dim, after layer normalization
  Matrix normalized;               // spans x 3*dim, (r - mean) / sigma
  Vector inv_sigma;                // spans
  std::vector<Vector> attention;   // per span, softmax weights over its words
};

struct PairEncoding {
  SpanReps source;
  SpanReps target;
};

namespace detail {

struct SingleSpanRep {
  Vector rep;
  Vector normalized;
  double inv_sigma = 0.0;
  Vector attention;
};

inline SingleSpanRep encode_span(const ModelParameters& params, const Matrix& words, const Span& span) {
  const int d = params.config.dim;
  const int len = span.length();
  auto block = words.middleRows(span.begin, len);

  Vector logits = block * params.attn_query;
  const double peak = logits.maxCoeff();
  Vector weights = (logits.array() - peak).exp().matrix();
  weights /= weights.sum();

  Vector raw(3 * d);
  raw.segment(0, d) = block.transpose() * weights;
  raw.segment(d, d) = words.row(span.begin).transpose();
  raw.segment(2 * d, d) = words.row(span.end).transpose();

  const double mean = raw.mean();
  const double var = (raw.array() - mean).square().mean();
  SingleSpanRep out;
  out.inv_sigma = 1.0 / std::sqrt(var + kLayerNormEpsilon);
  out.normalized = (raw.array() - mean) * out.inv_sigma;
  out.rep = (out.normalized.array() * params.ln_gain.array() + params.ln_bias.array()).matrix();
  out.attention = std::move(weights);
  return out;
}

}  // namespace detail

/// Attention-pooled vector concatenated with both endpoint vectors, then layer-normalized.
inline Vector span_representation(const ModelParameters& params, const Matrix& words, const Span& span) {
  if (span.begin < 0 || span.end >= words.rows() || span.end < span.begin) {
    throw ValidationError("span out of range");
  }
  return detail::encode_span(params, words, span).rep;
}

inline SpanReps encode_spans(const ModelParameters& params, const Matrix& words) {
  if (words.cols() != params.config.dim) {
    throw ValidationError("token vectors have dimension " + std::to_string(words.cols()) +
                          ", model expects " + std::to_string(params.config.dim));
  }
  SpanReps out;
  out.index = SpanIndex(static_cast<int>(words.rows()), params.config.max_span);
  const int count = out.index.size();
  const int w = params.span_width();
  out.reps.resize(count, w);
  out.normalized.resize(count, w);
  out.inv_sigma.resize(count);
  out.attention.resize(count);
  for (int s = 0; s < count; ++s) {
    auto single = detail::encode_span(params, words, out.index[s]);
    out.reps.row(s) = single.rep.transpose();
    out.normalized.row(s) = single.normalized.transpose();
    out.inv_sigma(s) = single.inv_sigma;
    out.attention[s] = std::move(single.attention);
  }
  return out;
}

inline PairEncoding encode_pair(const ModelParameters& params, const PairVectors& vectors) {
  return PairEncoding{encode_spans(params, vectors.source), encode_spans(params, vectors.target)};
}

/// FF_sim over [h_s; h_t; |h_s - h_t|; h_s * h_t] with a PReLU hidden layer.
inline double interaction_score(const ModelParameters& params, const Vector& source_rep,
                                const Vector& target_rep) {
  const int w = params.span_width();
  Vector features(4 * w);
  features << source_rep, target_rep, (source_rep - target_rep).cwiseAbs(),
      source_rep.cwiseProduct(target_rep);
  Vector z = params.ff_w1 * features + params.ff_b1;
  for (Eigen::Index h = 0; h < z.size(); ++h) {
    if (z(h) < 0.0) z(h) *= params.prelu_slope(h);
  }
  return params.ff_w2.dot(z) + params.ff_b2(0);
}

namespace detail {

// Target reps with the learned NULL vector appended as the last row.
inline Matrix with_null_row(const ModelParameters& params, const Matrix& target_reps) {
  Matrix out(target_reps.rows() + 1, target_reps.cols());
  out.topRows(target_reps.rows()) = target_reps;
  out.row(target_reps.rows()) = params.null_target.transpose();
  return out;
}

// Hidden pre-activations for one source span against every label row.
inline Matrix hidden_preactivations(const ModelParameters& params, const Eigen::RowVectorXd& hs,
                                    const Matrix& labels, const Matrix& target_term) {
  const int w = params.span_width();
  const auto w1a = params.ff_w1.middleCols(0, w);
  const auto w1c = params.ff_w1.middleCols(2 * w, w);
  const auto w1d = params.ff_w1.middleCols(3 * w, w);
  const Matrix abs_diff = (labels.rowwise() - hs).cwiseAbs();
  // (labels .* hs) W1d^T == labels (W1d .* hs)^T
  const Matrix w1d_scaled = w1d.array().rowwise() * hs.array();
  Eigen::RowVectorXd source_term = hs * w1a.transpose() + params.ff_b1.transpose();
  Matrix z = target_term + abs_diff * w1c.transpose() + labels * w1d_scaled.transpose();
  z.rowwise() += source_term;
  return z;
}

inline void prelu_inplace(const ModelParameters& params, Matrix& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double slope = params.prelu_slope(c);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      if (z(r, c) < 0.0) z(r, c) *= slope;
    }
  }
}

}  // namespace detail

/// upsilon for every (source span, target span or NULL); the NULL column is last.
inline Matrix interaction_scores(const ModelParameters& params, const Matrix& source_reps,
                                 const Matrix& target_reps) {
  const int w = params.span_width();
  const Matrix labels = detail::with_null_row(params, target_reps);
  const Matrix target_term = labels * params.ff_w1.middleCols(w, w).transpose();
  Matrix out(source_reps.rows(), labels.rows());
  for (Eigen::Index s = 0; s < source_reps.rows(); ++s) {
    Matrix z = detail::hidden_preactivations(params, source_reps.row(s), labels, target_term);
    detail::prelu_inplace(params, z);
    out.row(s) = (z * params.ff_w2).transpose().array() + params.ff_b2(0);
  }
  return out;
}

inline std::array<double, kNumBuckets> transition_scores(const ModelParameters& params) {
  std::array<double, kNumBuckets> tau{};
  const Vector scores = params.bucket_embeddings * params.transition_w;
  for (int k = 0; k < kNumBuckets; ++k) tau[k] = scores(k) + params.transition_b(0);
  return tau;
}

/// tau for a single transition; `prev_end` is kStartState before any non-NULL label.
inline double transition_score(const ModelParameters& params, int prev_end, const SpanLabel& label) {
  const int bucket = transition_bucket(prev_end, label);
  return params.bucket_embeddings.row(bucket).dot(params.transition_w) + params.transition_b(0);
}

inline ScoreTables build_score_tables(const ModelParameters& params, const SpanReps& source,
                                      const SpanReps& target) {
  ScoreTables tables;
  tables.source_spans = source.index;
  tables.target_spans = target.index;
  tables.upsilon = interaction_scores(params, source.reps, target.reps);
  tables.tau = transition_scores(params);
  return tables;
}

/// Tables for the pair seen in `direction` (the same span reps serve both directions).
inline ScoreTables build_score_tables(const ModelParameters& params, const PairEncoding& encoding,
                                      Direction direction) {
  return direction == Direction::kSourceToTarget
             ? build_score_tables(params, encoding.source, encoding.target)
             : build_score_tables(params, encoding.target, encoding.source);
}

inline ScoreTables build_score_tables(const SentencePair& pair, const EmbeddingStore& store,
                                      const ModelParameters& params, Direction direction) {
  return build_score_tables(params, encode_pair(params, vectors_for(pair, store)), direction);
}

/// Upstream gradients of a loss with respect to one direction's tables.
struct ScoreGradients {
  Matrix d_upsilon;
  std::array<double, kNumBuckets> d_tau{};
};

namespace detail {

// Backward through FF_sim for one direction; accumulates into span-rep gradients.
inline void interaction_backward(const ModelParameters& params, const Matrix& source_reps,
                                 const Matrix& target_reps, const Matrix& d_upsilon,
                                 Matrix& d_source_reps, Matrix& d_target_reps,
                                 ModelParameters& grads) {
  const int w = params.span_width();
  const Matrix labels = with_null_row(params, target_reps);
  const Eigen::Index null_row = target_reps.rows();
  const auto w1a = params.ff_w1.middleCols(0, w);
  const auto w1b = params.ff_w1.middleCols(w, w);
  const auto w1c = params.ff_w1.middleCols(2 * w, w);
  const auto w1d = params.ff_w1.middleCols(3 * w, w);
  const Matrix target_term = labels * w1b.transpose();

  for (Eigen::Index s = 0; s < source_reps.rows(); ++s) {
    const Vector upstream = d_upsilon.row(s).transpose();
    if (upstream.isZero(0.0)) continue;
    const Eigen::RowVectorXd hs = source_reps.row(s);
    const Matrix z = hidden_preactivations(params, hs, labels, target_term);
    Matrix activation = z;
    prelu_inplace(params, activation);

    grads.ff_w2 += activation.transpose() * upstream;
    grads.ff_b2(0) += upstream.sum();

    // dZ = (upstream w2^T) .* PReLU'(z); slopes collect upstream w2^T .* min(z, 0).
    Matrix dz = upstream * params.ff_w2.transpose();
    for (Eigen::Index c = 0; c < dz.cols(); ++c) {
      const double slope = params.prelu_slope(c);
      for (Eigen::Index r = 0; r < dz.rows(); ++r) {
        if (z(r, c) < 0.0) {
          grads.prelu_slope(c) += dz(r, c) * z(r, c);
          dz(r, c) *= slope;
        }
      }
    }

    const Matrix diff = labels.rowwise() - hs;
    const Matrix abs_diff = diff.cwiseAbs();
    const Matrix product = labels.array().rowwise() * hs.array();
    const Eigen::RowVectorXd dz_sum = dz.colwise().sum();

    grads.ff_b1 += dz_sum.transpose();
    grads.ff_w1.middleCols(0, w) += dz_sum.transpose() * hs;
    grads.ff_w1.middleCols(w, w) += dz.transpose() * labels;
    grads.ff_w1.middleCols(2 * w, w) += dz.transpose() * abs_diff;
    grads.ff_w1.middleCols(3 * w, w) += dz.transpose() * product;

    const Matrix d_abs = dz * w1c;   // labels x w
    const Matrix d_prod = dz * w1d;  // labels x w
    // d|t - s|/dt = sign(t - s); the kink at zero takes subgradient 0.
    const Matrix sign = diff.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
    const Matrix d_abs_signed = d_abs.cwiseProduct(sign);

    Eigen::RowVectorXd d_hs = dz_sum * w1a;
    d_hs -= d_abs_signed.colwise().sum();
    d_hs += d_prod.cwiseProduct(labels).colwise().sum();
    d_source_reps.row(s) += d_hs;

    Matrix d_labels = dz * w1b + d_abs_signed;
    d_labels += (d_prod.array().rowwise() * hs.array()).matrix();
    d_target_reps += d_labels.topRows(null_row);
    grads.null_target += d_labels.row(null_row).transpose();
  }
}

// Backward through layer norm and attention pooling for every span of one sentence.
inline void span_backward(const ModelParameters& params, const Matrix& words, const SpanReps& reps,
                          const Matrix& d_reps, ModelParameters& grads) {
  const int d = params.config.dim;
  const double width = static_cast<double>(params.span_width());
  for (int s = 0; s < reps.index.size(); ++s) {
    const Eigen::RowVectorXd dh = d_reps.row(s);
    if (dh.isZero(0.0)) continue;
    const Eigen::RowVectorXd xhat = reps.normalized.row(s);
    grads.ln_gain += dh.cwiseProduct(xhat).transpose();
    grads.ln_bias += dh.transpose();
    const Eigen::RowVectorXd dxhat = dh.cwiseProduct(params.ln_gain.transpose());
    const double mean_dxhat = dxhat.sum() / width;
    const double mean_dxhat_xhat = dxhat.dot(xhat) / width;
    const Eigen::RowVectorXd draw =
        reps.inv_sigma(s) * (dxhat.array() - mean_dxhat - xhat.array() * mean_dxhat_xhat).matrix();

    // Only the pooled block depends on parameters (the query); endpoints are frozen inputs.
    const Span& span = reps.index[s];
    const auto block = words.middleRows(span.begin, span.length());
    const Vector& alpha = reps.attention[s];
    const Vector d_alpha = block * draw.segment(0, d).transpose();
    const double mean_term = alpha.dot(d_alpha);
    const Vector d_logits = alpha.cwiseProduct((d_alpha.array() - mean_term).matrix());
    grads.attn_query += block.transpose() * d_logits;
  }
}

}  // namespace detail

/// Chain rule from table-level gradients of both directions into every parameter.
/// Accumulates (+=) into `grads`.
inline void accumulate_gradients(const ModelParameters& params, const PairVectors& vectors,
                                 const PairEncoding& encoding, const ScoreGradients& forward,
                                 const ScoreGradients& backward, ModelParameters& grads) {
  Matrix d_source = Matrix::Zero(encoding.source.reps.rows(), encoding.source.reps.cols());
  Matrix d_target = Matrix::Zero(encoding.target.reps.rows(), encoding.target.reps.cols());
  detail::interaction_backward(params, encoding.source.reps, encoding.target.reps,
                               forward.d_upsilon, d_source, d_target, grads);
  detail::interaction_backward(params, encoding.target.reps, encoding.source.reps,
                               backward.d_upsilon, d_target, d_source, grads);

  for (int k = 0; k < kNumBuckets; ++k) {
    const double dtau = forward.d_tau[k] + backward.d_tau[k];
    if (dtau == 0.0) continue;
    grads.transition_w += dtau * params.bucket_embeddings.row(k).transpose();
    grads.transition_b(0) += dtau;
    grads.bucket_embeddings.row(k) += dtau * params.transition_w.transpose();
  }

  detail::span_backward(params, vectors.source, encoding.source, d_source, grads);
  detail::span_backward(params, vectors.target, encoding.target, d_target, grads);
}

/// logistic(upsilon) between a fixed source span and arbitrary target spans, which may
/// exceed the model's maximum span length.
class SpanSimilarity {
 public:
  SpanSimilarity(const ModelParameters& params, const Matrix& source_words, const Matrix& target_words)
      : params_(params), source_words_(source_words), target_words_(target_words) {}

  double operator()(const Span& source, const Span& target) const {
    const Vector hs = span_representation(params_, source_words_, source);
    const Vector ht = span_representation(params_, target_words_, target);
    return 1.0 / (1.0 + std::exp(-interaction_score(params_, hs, ht)));
  }

 private:
  const ModelParameters& params_;
  const Matrix& source_words_;
  const Matrix& target_words_;
};

}  // namespace mwa
