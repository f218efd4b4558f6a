#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ceg/core.hpp"

namespace ceg::search {

/// Parameters of the fault-tolerant boundary search.
///
/// Each probe moves the position by d * (max(p[c] - theta, 0) + epsilon)
/// towards the boundary, then the interval d decays by alpha. alpha must
/// exceed 0.5 so that the travel left after any step is larger than the
/// distance a single wrong step can add.
struct SearchConfig {
  double alpha = 0.9;
  double theta = 0.5;
  double epsilon = 0.01;
  double initial_fraction = 0.5;
  /// Multiply the stride by alpha as well (Δt = round(α·d·(...))). Off by
  /// default: the reference loop applies alpha only when decaying d.
  bool stride_alpha = false;

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

struct ProbeRecord {
  int iteration = 0;
  FrameIndex position;
  std::int64_t interval = 0;  // d at the time of the probe
  GiClass predicted = GiClass::SmallIntestine;
  double confidence = 0.0;
  std::int64_t stride = 0;  // signed move before clamping to [1, T]

  friend bool operator==(const ProbeRecord&, const ProbeRecord&) = default;
};

struct SearchTrace {
  std::vector<ProbeRecord> probes;
  FrameIndex result;
  std::size_t oracle_calls = 0;

  friend bool operator==(const SearchTrace&, const SearchTrace&) = default;
};

/// Raised when the classifier fails mid-search; carries the probes made so far.
class SearchError : public std::runtime_error {
 public:
  SearchError(const std::string& what, SearchTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const SearchTrace& partial_trace() const { return partial_; }

 private:
  SearchTrace partial_;
};

enum class Boundary { Start, End };

/// Rounds half away from zero.
std::int64_t roundint(double x);

/// Next search interval: round(alpha * d), forced to shrink by at least one
/// frame so the loop terminates for every alpha < 1.
std::int64_t decay_interval(std::int64_t d, double alpha);

/// Ending frame of the small intestine. Probes left of the boundary
/// (classes 1 and 2) push the position right, colorectum probes push it left.
SearchTrace search_end(const FrameClassifier& classifier, std::int64_t video_length,
                       const SearchConfig& cfg = {});

/// Starting frame: class 1 pushes right, classes 2 and 3 push left.
SearchTrace search_start(const FrameClassifier& classifier, std::int64_t video_length,
                         const SearchConfig& cfg = {});

SearchTrace search_boundary(Boundary which, const FrameClassifier& classifier,
                            std::int64_t video_length, const SearchConfig& cfg = {});

struct Grounding {
  Segment segment;
  SearchTrace start_trace;
  SearchTrace end_trace;
  bool swapped = false;               // start search landed after end search
  bool small_intestine_seen = false;  // some probe reported class 2

  bool flagged() const { return swapped || !small_intestine_seen; }
  std::size_t oracle_calls() const { return start_trace.oracle_calls + end_trace.oracle_calls; }
};

/// Runs search_start then search_end. An inverted pair is swapped, and the
/// result is flagged rather than rejected.
Grounding ground_small_intestine(const FrameClassifier& classifier, std::int64_t video_length,
                                 const SearchConfig& cfg = {});

struct ScanResult {
  std::optional<Segment> segment;  // empty when no frame is class 2
  std::size_t oracle_calls = 0;
};

/// Exhaustive baseline: classifies every frame and returns the first and
/// last class-2 frames.
ScanResult scan_baseline(const FrameClassifier& classifier, std::int64_t video_length);

namespace testing {

/// Same loop as search_boundary but skips SearchConfig::validate(), so
/// tests can demonstrate what happens with alpha <= 0.5.
SearchTrace search_boundary_unchecked(Boundary which, const FrameClassifier& classifier,
                                      std::int64_t video_length, const SearchConfig& cfg);

}  // namespace testing

}  // namespace ceg::search
