#include "ceg/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ceg {

GiClass class_from_label(int label) {
  if (label < 1 || label > 3) {
    throw ValidationError("class label out of range 1..3: " + std::to_string(label));
  }
  return static_cast<GiClass>(label);
}

std::string_view to_string(GiClass c) {
  switch (c) {
    case GiClass::EsophagusStomach:
      return "esophagus_stomach";
    case GiClass::SmallIntestine:
      return "small_intestine";
    case GiClass::Colorectum:
      return "colorectum";
  }
  return "unknown";
}

ConfidenceVector validate_confidence(const std::array<double, 3>& raw) {
  double sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i]) || raw[i] < -kNegativeTolerance) {
      std::ostringstream msg;
      msg << "confidence component p" << (i + 1) << " = " << raw[i]
          << " is negative or not finite";
      throw ValidationError(msg.str());
    }
    sum += raw[i];
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    // Name the component furthest from a value that would fix the sum.
    auto worst = std::max_element(raw.begin(), raw.end()) - raw.begin();
    std::ostringstream msg;
    msg.precision(17);
    msg << "confidence components sum to " << sum << " (largest component p" << (worst + 1)
        << " = " << raw[static_cast<std::size_t>(worst)] << ")";
    throw ValidationError(msg.str());
  }

  std::array<double, 3> p{};
  double clamped_sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    p[i] = std::max(raw[i], 0.0);
    clamped_sum += p[i];
  }
  for (auto& v : p) v /= clamped_sum;
  return ConfidenceVector(p);
}

GiClass argmax_class(const ConfidenceVector& p) {
  const auto& v = p.values();
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<GiClass>(best + 1);
}

Segment Segment::checked(std::int64_t start, std::int64_t end, std::int64_t video_length) {
  if (start < 1 || end > video_length || start > end) {
    std::ostringstream msg;
    msg << "invalid segment [" << start << ", " << end << "] for a video of " << video_length
        << " frames";
    throw ValidationError(msg.str());
  }
  return Segment{FrameIndex(start), FrameIndex(end)};
}

}  // namespace ceg
