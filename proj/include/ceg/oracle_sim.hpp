#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ceg/confusion.hpp"
#include "ceg/core.hpp"
#include "ceg/fusion.hpp"

namespace ceg::sim {

/// Ground truth of a synthetic video: frames [1, start) are class 1,
/// [start, end] class 2, (end, frames] class 3.
struct VideoLayout {
  std::int64_t frames = 0;
  std::int64_t start = 0;
  std::int64_t end = 0;

  /// Throws ValidationError unless 1 <= start <= end <= frames.
  static VideoLayout checked(std::int64_t frames, std::int64_t start, std::int64_t end);

  GiClass class_at(FrameIndex t) const;
  Segment small_intestine() const { return Segment{FrameIndex(start), FrameIndex(end)}; }

  friend bool operator==(const VideoLayout&, const VideoLayout&) = default;
};

/// Frame shares of the three regions averaged over the clinical dataset.
inline constexpr std::array<double, 3> kDatasetProportions = {0.072, 0.449, 0.479};

/// Region boundaries at the cumulative proportions:
///   start = round(p1*T) + 1,  end = round((p1+p2)*T).
/// With jitter j > 0 each proportion is first scaled by an independent
/// uniform factor in [1-j, 1+j] (seeded) and the set renormalised.
/// Throws ValidationError when a region would be empty.
VideoLayout generate_layout(std::int64_t frames, const std::array<double, 3>& proportions,
                            double jitter, std::uint64_t seed);

/// Layout files hold a single line "T t_s t_e".
VideoLayout read_layout(std::istream& in);
VideoLayout load_layout(const std::filesystem::path& path);
void write_layout(std::ostream& out, const VideoLayout& layout);
void save_layout(const std::filesystem::path& path, const VideoLayout& layout);

/// Emits the true class with fixed confidence; the remainder is split
/// equally between the other two classes.
class PerfectOracle final : public FrameClassifier {
 public:
  /// Requires 1/3 < confidence <= 1.
  PerfectOracle(VideoLayout layout, double confidence = 1.0);
  ConfidenceVector classify(FrameIndex t, std::int64_t video_length) const override;

 private:
  VideoLayout layout_;
  double confidence_;
};

struct ConfidenceModel {
  enum class Kind { Fixed, Beta };
  Kind kind = Kind::Fixed;
  /// Confidence of the sampled class (Fixed) or its mean (Beta).
  double mean = 0.9;
  /// Beta concentration a+b; larger is tighter around the mean.
  double concentration = 20.0;

  void validate() const;
};

struct NoisyOracleConfig {
  ConfusionMatrix matrix = ConfusionMatrix::resnet_tfe();
  ConfidenceModel confidence;
  std::uint64_t seed = 0;
};

/// Predicts a class drawn from the confusion-matrix column of the true
/// class. Draws are i.i.d. across frames but frozen per frame: the
/// generator for frame t is seeded from (seed, t), so the same frame always
/// yields the same vector regardless of probe order.
///
/// The emitted vector gives the drawn class its confidence (always > 1/3)
/// and splits the rest equally, so argmax is the drawn class.
class NoisyOracle final : public FrameClassifier {
 public:
  NoisyOracle(VideoLayout layout, NoisyOracleConfig cfg);
  ConfidenceVector classify(FrameIndex t, std::int64_t video_length) const override;

  GiClass predicted_class(FrameIndex t) const;

 private:
  VideoLayout layout_;
  NoisyOracleConfig cfg_;
};

/// Confidence files: one "<frame>,<p1>,<p2>,<p3>" record per line covering
/// frames 1..T exactly once. Blank lines and '#' comments are skipped.
std::vector<ConfidenceVector> read_confidences(std::istream& in,
                                               const std::string& source = "<stream>");
void write_confidences(std::ostream& out, std::span<const ConfidenceVector> frames);

/// Classifies every frame of a video.
std::vector<ConfidenceVector> tabulate(const FrameClassifier& classifier,
                                       std::int64_t video_length);

/// Serves stored per-frame confidences.
class FileOracle final : public FrameClassifier {
 public:
  explicit FileOracle(std::vector<ConfidenceVector> frames);
  static FileOracle load(const std::filesystem::path& path);

  std::int64_t frames() const { return static_cast<std::int64_t>(frames_.size()); }
  ConfidenceVector classify(FrameIndex t, std::int64_t video_length) const override;

 private:
  std::vector<ConfidenceVector> frames_;
};

/// Per-frame feature vectors f_1..f_T, all of one dimension.
class FeatureTable {
 public:
  explicit FeatureTable(std::vector<fusion::Vector> frames);

  /// "<frame> <m decimals>" per line, frames 1..T exactly once.
  static FeatureTable read(std::istream& in, const std::string& source = "<stream>");
  static FeatureTable load(const std::filesystem::path& path);
  void write(std::ostream& out) const;

  std::int64_t frames() const { return static_cast<std::int64_t>(frames_.size()); }
  std::size_t dimension() const { return frames_.front().size(); }
  const fusion::Vector& at(FrameIndex t) const { return frames_.at(static_cast<std::size_t>(t.value - 1)); }

  /// Features for t-N..t+N; positions outside the video repeat the edge frame.
  std::vector<fusion::Vector> window(FrameIndex t, int radius) const;

 private:
  std::vector<fusion::Vector> frames_;
};

/// Runs the transformer fusion over a clamped 2N+1 window around each probe.
class FusionOracle final : public FrameClassifier {
 public:
  /// Throws ValidationError when N or the feature dimension disagree with
  /// the weights.
  FusionOracle(FeatureTable features, fusion::FusionWeights weights, int radius);

  ConfidenceVector classify(FrameIndex t, std::int64_t video_length) const override;
  int context_radius() const override { return radius_; }

 private:
  FeatureTable features_;
  fusion::FusionWeights weights_;
  int radius_;
};

/// Single-frame classifier: the linear head applied to f_t alone.
class SingleFrameOracle final : public FrameClassifier {
 public:
  SingleFrameOracle(FeatureTable features, fusion::AffineLayer head);
  ConfidenceVector classify(FrameIndex t, std::int64_t video_length) const override;

 private:
  FeatureTable features_;
  fusion::AffineLayer head_;
};

}  // namespace ceg::sim
