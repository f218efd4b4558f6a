#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ceg/confusion.hpp"
#include "ceg/core.hpp"

namespace ceg::eval {

/// |pred ∩ truth| / |pred ∪ truth| over frame sets with inclusive endpoints.
double segment_iou(const Segment& pred, const Segment& truth);

struct ClassTally {
  std::int64_t total = 0;    // n_i
  std::int64_t correct = 0;  // c_i
};

struct Accuracy {
  double micro = 0.0;  // pooled over images
  double macro = 0.0;  // mean of per-class accuracies
};

/// Throws ValidationError if counts are inconsistent or any class is empty.
Accuracy micro_macro_accuracy(std::span<const ClassTally, 3> tallies);

/// Pooled accuracy only; defined whenever some class has samples.
double micro_accuracy(std::span<const ClassTally, 3> tallies);

struct Prediction {
  GiClass predicted;
  GiClass truth;
};

std::array<ClassTally, 3> tally(std::span<const Prediction> predictions);

/// Column-normalised empirical confusion matrix. Throws ValidationError if
/// some ground-truth class has no samples.
ConfusionMatrix confusion_estimate(std::span<const Prediction> predictions);

/// Box-plot statistics of absolute boundary deviations, in frames.
///
/// Quartiles use linear interpolation between order statistics
/// (Hyndman-Fan type 7: h = (n-1)q). Whiskers are the most extreme data
/// within 1.5 IQR of the quartiles, never inside the box.
struct DeviationSummary {
  double median = 0;
  double lower_quartile = 0;
  double upper_quartile = 0;
  double mean = 0;
  double whisker_low = 0;
  double whisker_high = 0;
  std::size_t count = 0;
};

DeviationSummary deviation_summary(std::span<const double> deviations);

/// Type-7 quantile of already sorted data, q in [0, 1].
double sorted_quantile(std::span<const double> sorted, double q);

struct GroundingResult {
  Segment predicted;
  Segment truth;
  double iou = 0;
  std::int64_t start_error = 0;
  std::int64_t end_error = 0;
  std::size_t oracle_calls = 0;
};

GroundingResult evaluate_grounding(const Segment& predicted, const Segment& truth,
                                   std::size_t oracle_calls);

}  // namespace ceg::eval
