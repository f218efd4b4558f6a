#include "ceg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

namespace ceg::eval {

double segment_iou(const Segment& pred, const Segment& truth) {
  const std::int64_t lo = std::max(pred.start.value, truth.start.value);
  const std::int64_t hi = std::min(pred.end.value, truth.end.value);
  const std::int64_t inter = std::max<std::int64_t>(0, hi - lo + 1);
  const std::int64_t uni = pred.length() + truth.length() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

void check_tallies(std::span<const ClassTally, 3> tallies) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& t = tallies[i];
    if (t.total < 0 || t.correct < 0 || t.correct > t.total) {
      throw ValidationError("class " + std::to_string(i + 1) + ": need 0 <= c_i <= n_i");
    }
    total += t.total;
  }
  if (total == 0) throw ValidationError("accuracy needs at least one sample");
}

}  // namespace

double micro_accuracy(std::span<const ClassTally, 3> tallies) {
  check_tallies(tallies);
  std::int64_t n = 0, c = 0;
  for (const auto& t : tallies) {
    n += t.total;
    c += t.correct;
  }
  return static_cast<double>(c) / static_cast<double>(n);
}

Accuracy micro_macro_accuracy(std::span<const ClassTally, 3> tallies) {
  Accuracy acc;
  acc.micro = micro_accuracy(tallies);
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (tallies[i].total == 0) {
      throw ValidationError("macro accuracy undefined: class " + std::to_string(i + 1) +
                            " has no samples");
    }
    sum += static_cast<double>(tallies[i].correct) / static_cast<double>(tallies[i].total);
  }
  acc.macro = sum / 3.0;
  return acc;
}

std::array<ClassTally, 3> tally(std::span<const Prediction> predictions) {
  std::array<ClassTally, 3> out{};
  for (const auto& p : predictions) {
    auto& t = out[slot(p.truth)];
    ++t.total;
    if (p.predicted == p.truth) ++t.correct;
  }
  return out;
}

ConfusionMatrix confusion_estimate(std::span<const Prediction> predictions) {
  ConfusionMatrix::Raw counts{};
  std::array<std::int64_t, 3> per_truth{};
  for (const auto& p : predictions) {
    counts[slot(p.predicted)][slot(p.truth)] += 1.0;
    ++per_truth[slot(p.truth)];
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (per_truth[i] == 0) {
      throw ValidationError("confusion estimate: no samples with ground truth class " +
                            std::to_string(i + 1));
    }
  }
  return ConfusionMatrix::normalized(counts);
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of empty data");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

DeviationSummary deviation_summary(std::span<const double> deviations) {
  if (deviations.empty()) throw ValidationError("deviation summary of empty data");
  std::vector<double> v(deviations.begin(), deviations.end());
  std::sort(v.begin(), v.end());

  DeviationSummary s;
  s.count = v.size();
  s.median = sorted_quantile(v, 0.5);
  s.lower_quartile = sorted_quantile(v, 0.25);
  s.upper_quartile = sorted_quantile(v, 0.75);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());

  const double iqr = s.upper_quartile - s.lower_quartile;
  const double low_fence = s.lower_quartile - 1.5 * iqr;
  const double high_fence = s.upper_quartile + 1.5 * iqr;
  // Interpolated quartiles can lie past every datum inside the fence; the
  // whisker then collapses onto the box edge.
  s.whisker_low = std::min(*std::lower_bound(v.begin(), v.end(), low_fence), s.lower_quartile);
  s.whisker_high =
      std::max(*(std::upper_bound(v.begin(), v.end(), high_fence) - 1), s.upper_quartile);
  return s;
}

GroundingResult evaluate_grounding(const Segment& predicted, const Segment& truth,
                                   std::size_t oracle_calls) {
  return GroundingResult{predicted,
                         truth,
                         segment_iou(predicted, truth),
                         std::llabs(predicted.start.value - truth.start.value),
                         std::llabs(predicted.end.value - truth.end.value),
                         oracle_calls};
}

}  // namespace ceg::eval
