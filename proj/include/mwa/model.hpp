#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwa/errors.hpp"
#include "mwa/score_tables.hpp"

namespace mwa {

inline constexpr int kBucketEmbeddingDim = 128;

struct ModelConfig {
  int dim = 0;         // token vector width
  int max_span = 3;    // D
  int hidden = 512;    // FF_sim hidden width
  double cost_scale = 1.0;
  std::uint64_t seed = 1;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Mutable view of one named tensor (column-major storage).
struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const { return rows * cols; }
};

/// Every learned tensor of the aligner. Gradients and optimizer moments reuse this
/// type with identical shapes.
struct ModelParameters {
  ModelConfig config;

  Eigen::VectorXd attn_query;         // dim
  Eigen::VectorXd ln_gain;            // 3*dim
  Eigen::VectorXd ln_bias;            // 3*dim
  Eigen::MatrixXd ff_w1;              // hidden x 12*dim
  Eigen::VectorXd ff_b1;              // hidden
  Eigen::VectorXd prelu_slope;        // hidden
  Eigen::VectorXd ff_w2;              // hidden
  Eigen::VectorXd ff_b2;              // 1
  Eigen::MatrixXd bucket_embeddings;  // 15 x 128
  Eigen::VectorXd transition_w;       // 128
  Eigen::VectorXd transition_b;       // 1
  Eigen::VectorXd null_target;        // 3*dim

  int span_width() const { return 3 * config.dim; }

  static ModelParameters zeros(const ModelConfig& config) {
    if (config.dim < 1 || config.hidden < 1 || config.max_span < 1) {
      throw ValidationError("model config needs dim >= 1, hidden >= 1, max_span >= 1");
    }
    const int d = config.dim;
    const int h = config.hidden;
    ModelParameters p;
    p.config = config;
    p.attn_query = Eigen::VectorXd::Zero(d);
    p.ln_gain = Eigen::VectorXd::Zero(3 * d);
    p.ln_bias = Eigen::VectorXd::Zero(3 * d);
    p.ff_w1 = Eigen::MatrixXd::Zero(h, 12 * d);
    p.ff_b1 = Eigen::VectorXd::Zero(h);
    p.prelu_slope = Eigen::VectorXd::Zero(h);
    p.ff_w2 = Eigen::VectorXd::Zero(h);
    p.ff_b2 = Eigen::VectorXd::Zero(1);
    p.bucket_embeddings = Eigen::MatrixXd::Zero(kNumBuckets, kBucketEmbeddingDim);
    p.transition_w = Eigen::VectorXd::Zero(kBucketEmbeddingDim);
    p.transition_b = Eigen::VectorXd::Zero(1);
    p.null_target = Eigen::VectorXd::Zero(3 * d);
    return p;
  }

  /// Weights uniform(-0.05, 0.05), biases 0, PReLU slopes 0.25, layer-norm gain 1.
  static ModelParameters initialize(const ModelConfig& config) {
    ModelParameters p = zeros(config);
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> uniform(-0.05, 0.05);
    auto fill = [&](auto& tensor) {
      for (Eigen::Index k = 0; k < tensor.size(); ++k) tensor.data()[k] = uniform(rng);
    };
    fill(p.attn_query);
    fill(p.ff_w1);
    fill(p.ff_w2);
    fill(p.bucket_embeddings);
    fill(p.transition_w);
    fill(p.null_target);
    p.ln_gain.setOnes();
    p.prelu_slope.setConstant(0.25);
    return p;
  }

  std::vector<TensorRef> tensors() {
    auto ref = [](const char* name, auto& t) { return TensorRef{name, t.data(), t.rows(), t.cols()}; };
    return {ref("attn_query", attn_query),
            ref("ln_gain", ln_gain),
            ref("ln_bias", ln_bias),
            ref("ff_w1", ff_w1),
            ref("ff_b1", ff_b1),
            ref("prelu_slope", prelu_slope),
            ref("ff_w2", ff_w2),
            ref("ff_b2", ff_b2),
            ref("bucket_embeddings", bucket_embeddings),
            ref("transition_w", transition_w),
            ref("transition_b", transition_b),
            ref("null_target", null_target)};
  }

  std::vector<TensorRef> tensors() const { return const_cast<ModelParameters*>(this)->tensors(); }

  void set_zero() {
    for (auto& t : tensors()) std::fill(t.data, t.data + t.size(), 0.0);
  }

  /// this += other, tensor by tensor in a fixed order.
  void add(const ModelParameters& other) {
    auto dst = tensors();
    auto src = other.tensors();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      for (Eigen::Index e = 0; e < dst[k].size(); ++e) dst[k].data[e] += src[k].data[e];
    }
  }

  bool all_finite() const {
    for (const auto& t : tensors()) {
      for (Eigen::Index e = 0; e < t.size(); ++e) {
        if (!std::isfinite(t.data[e])) return false;
      }
    }
    return true;
  }
};

}  // namespace mwa
