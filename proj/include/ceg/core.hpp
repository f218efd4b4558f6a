#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ceg {

/// Anatomical region of a frame, in the order the capsule traverses them.
enum class GiClass : int {
  EsophagusStomach = 1,
  SmallIntestine = 2,
  Colorectum = 3,
};

inline constexpr std::array<GiClass, 3> kAllClasses = {
    GiClass::EsophagusStomach, GiClass::SmallIntestine, GiClass::Colorectum};

/// 0-based slot of a class inside confidence vectors and matrices.
constexpr std::size_t slot(GiClass c) { return static_cast<std::size_t>(c) - 1; }

constexpr int label(GiClass c) { return static_cast<int>(c); }

/// Parses a 1-based class label; throws ValidationError outside 1..3.
GiClass class_from_label(int label);

std::string_view to_string(GiClass c);

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; messages carry source and line number.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Absolute tolerance on the component sum of a confidence vector.
inline constexpr double kSimplexTolerance = 1e-6;
/// Components down to this value are treated as round-off and clamped to 0.
inline constexpr double kNegativeTolerance = 1e-9;

/// 3-way category confidence on the probability simplex. Only
/// constructible through validate_confidence().
class ConfidenceVector {
 public:
  double operator[](GiClass c) const { return p_[slot(c)]; }
  double at(std::size_t slot) const { return p_.at(slot); }
  const std::array<double, 3>& values() const { return p_; }

  friend bool operator==(const ConfidenceVector&, const ConfidenceVector&) = default;

 private:
  friend ConfidenceVector validate_confidence(const std::array<double, 3>& raw);
  explicit ConfidenceVector(const std::array<double, 3>& p) : p_(p) {}
  std::array<double, 3> p_;
};

/// Accepts a raw 3-vector iff every component is >= -1e-9 and the sum is
/// within 1e-6 of 1. Negatives are clamped to zero and the result is
/// renormalised to sum to 1.
ConfidenceVector validate_confidence(const std::array<double, 3>& raw);

/// Class with maximal confidence; ties go to the lowest class index.
GiClass argmax_class(const ConfidenceVector& p);

/// 1-based frame position inside a video.
struct FrameIndex {
  std::int64_t value = 1;

  constexpr FrameIndex() = default;
  constexpr explicit FrameIndex(std::int64_t v) : value(v) {}

  friend constexpr auto operator<=>(FrameIndex, FrameIndex) = default;
};

/// Inclusive frame range [start, end].
struct Segment {
  FrameIndex start;
  FrameIndex end;

  /// Throws ValidationError unless 1 <= start <= end <= video_length.
  static Segment checked(std::int64_t start, std::int64_t end, std::int64_t video_length);

  std::int64_t length() const { return end.value - start.value + 1; }

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Oracle mapping a probe position to category confidences.
///
/// Implementations must be deterministic: probing the same frame twice on
/// the same instance returns identical vectors. Positions passed in are
/// always inside [1, video_length]; implementations that look at a context
/// window clamp that window themselves. Every classifier in this project is
/// read-only after construction and safe for concurrent probes unless its
/// own documentation says otherwise.
class FrameClassifier {
 public:
  virtual ~FrameClassifier() = default;

  virtual ConfidenceVector classify(FrameIndex t, std::int64_t video_length) const = 0;

  /// Half-width N of the 2N+1 frame context the classifier looks at.
  virtual int context_radius() const { return 0; }
};

}  // namespace ceg
