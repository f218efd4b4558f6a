#pragma once

// Inference for the inter-frame transformer fusion classifier.
//
// A window of 2N+1 frame features f_{t-N..t+N} (dimension m) goes through
// 8 self-attention heads, each projecting every frame to query/key/value
// vectors of dimension m/8. Heads are concatenated (back to dimension m),
// compressed by an affine layer, and passed through a residual block
// x + fc2(relu(fc1(x))). The 2N+1 fused vectors are concatenated in window
// order and fed to a two-layer head fc2(relu(fc1(.))) giving 3 logits, which
// a softmax turns into the confidence of the centre frame.
//
// There is no positional encoding, so the attention stage is permutation
// equivariant over the window; only the head sees frame order.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ceg/core.hpp"
#include "ceg/tensor_file.hpp"

namespace ceg::fusion {

using Vector = std::vector<double>;

/// y = W x + b with W stored row-major as [out, in].
struct AffineLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Vector apply(std::span<const double> x) const;
};

struct HeadProjection {
  AffineLayer query;
  AffineLayer key;
  AffineLayer value;
};

/// Row-softmaxed (2N+1)x(2N+1) attention weights.
class AttentionMatrix {
 public:
  AttentionMatrix(std::size_t n, std::vector<double> entries)
      : n_(n), a_(std::move(entries)) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {a_.data() + i * n_, n_}; }

 private:
  std::size_t n_;
  std::vector<double> a_;
};

class FusionWeights {
 public:
  static constexpr std::size_t kHeads = 8;

  /// Builds and validates weights from named tensors:
  ///
  ///   attention.{query,key,value}.weight  [8, m/8, m]
  ///   attention.{query,key,value}.bias    [8, m/8]
  ///   compress.weight [c, m]       compress.bias [c]
  ///   residual.fc1.weight [r, c]   residual.fc1.bias [r]
  ///   residual.fc2.weight [c, r]   residual.fc2.bias [c]
  ///   head.fc1.weight [h, (2N+1)*c]  head.fc1.bias [h]
  ///   head.fc2.weight [3, h]       head.fc2.bias [3]
  ///   linear.weight [3, m]  linear.bias [3]      (optional single-frame head)
  ///
  /// Unknown or missing names and inconsistent shapes are rejected with
  /// the offending tensor named in the message.
  static FusionWeights from_tensors(const TensorMap& tensors);
  static FusionWeights load(const std::filesystem::path& path);

  TensorMap to_tensors() const;

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t head_dim() const { return feature_dim_ / kHeads; }
  std::size_t fused_dim() const { return compress_.out; }
  std::size_t window() const { return window_; }
  int radius() const { return static_cast<int>((window_ - 1) / 2); }

  const std::array<HeadProjection, kHeads>& heads() const { return heads_; }
  const AffineLayer& compress() const { return compress_; }
  const AffineLayer& residual_fc1() const { return residual_fc1_; }
  const AffineLayer& residual_fc2() const { return residual_fc2_; }
  const AffineLayer& head_fc1() const { return head_fc1_; }
  const AffineLayer& head_fc2() const { return head_fc2_; }
  const std::optional<AffineLayer>& single_frame_head() const { return linear_; }

 private:
  FusionWeights() = default;

  std::size_t feature_dim_ = 0;
  std::size_t window_ = 0;
  std::array<HeadProjection, kHeads> heads_;
  AffineLayer compress_;
  AffineLayer residual_fc1_;
  AffineLayer residual_fc2_;
  AffineLayer head_fc1_;
  AffineLayer head_fc2_;
  std::optional<AffineLayer> linear_;
};

/// Numerically stable softmax (max subtracted before exponentiation).
Vector softmax(std::span<const double> logits);

/// A_ij = softmax_j(q_i . k_j / sqrt(scale_dim)). Queries and keys must
/// share one dimension; scale_dim is the feature dimension m.
AttentionMatrix attention_scores(std::span<const Vector> queries, std::span<const Vector> keys,
                                 std::size_t scale_dim);

/// Per-frame concatenation of the 8 attended value vectors.
std::vector<Vector> attend(std::span<const Vector> window, const FusionWeights& w);

/// Per-frame features after compression and the residual block.
std::vector<Vector> fused_features(std::span<const Vector> window, const FusionWeights& w);

/// Confidence for the centre frame of a 2N+1 window.
ConfidenceVector fuse_window(std::span<const Vector> window, const FusionWeights& w);

/// softmax(W f + b) for the single-frame classifier.
ConfidenceVector linear_head(std::span<const double> feature, const AffineLayer& layer);

/// -ln p[y], with p[y] clamped below at 1e-12.
double cross_entropy(const ConfidenceVector& p, GiClass truth);

}  // namespace ceg::fusion
