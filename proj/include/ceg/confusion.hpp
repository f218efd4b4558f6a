#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>

#include "ceg/core.hpp"

namespace ceg {

/// Column-stochastic 3x3 matrix: entry (pred, truth) is the probability of
/// predicting `pred` for a frame whose ground truth is `truth`.
class ConfusionMatrix {
 public:
  using Raw = std::array<std::array<double, 3>, 3>;  // [pred][truth]

  /// Identity.
  ConfusionMatrix();

  /// Scales every column to sum to 1. Raw entries may be counts or
  /// percentages; they must be non-negative with a positive column sum.
  static ConfusionMatrix normalized(const Raw& raw);

  /// Image-level confusion of the single-frame ResNet classifier.
  static ConfusionMatrix resnet();
  /// Same backbone with transformer fusion.
  static ConfusionMatrix resnet_tfe();

  /// Three whitespace-separated rows (predicted class 1..3) of three
  /// columns (truth 1..3); '#' starts a comment.
  static ConfusionMatrix read(std::istream& in);
  static ConfusionMatrix load(const std::filesystem::path& path);

  double operator()(GiClass pred, GiClass truth) const { return m_[slot(pred)][slot(truth)]; }
  std::array<double, 3> column(GiClass truth) const;
  const Raw& entries() const { return m_; }

 private:
  explicit ConfusionMatrix(const Raw& m) : m_(m) {}
  Raw m_;
};

}  // namespace ceg
