#include "ceg/search.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace ceg::search {

void SearchConfig::validate() const {
  auto fail = [](const char* field, double value, const char* rule) {
    std::ostringstream msg;
    msg << "search config: " << field << " = " << value << " violates " << rule;
    throw ValidationError(msg.str());
  };
  if (!(alpha > 0.5 && alpha < 1.0)) fail("alpha", alpha, "0.5 < alpha < 1");
  if (!(theta >= 0.0 && theta < 1.0)) fail("theta", theta, "0 <= theta < 1");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail("epsilon", epsilon, "epsilon > 0");
  if (!(initial_fraction > 0.0 && initial_fraction < 1.0)) {
    fail("initial_fraction", initial_fraction, "0 < initial_fraction < 1");
  }
}

std::int64_t roundint(double x) {
  return static_cast<std::int64_t>(std::round(x));
}

std::int64_t decay_interval(std::int64_t d, double alpha) {
  return std::min(roundint(alpha * static_cast<double>(d)), d - 1);
}

namespace {

bool moves_right(Boundary which, GiClass c) {
  if (which == Boundary::End) return c != GiClass::Colorectum;
  return c == GiClass::EsophagusStomach;
}

SearchTrace run(Boundary which, const FrameClassifier& classifier, std::int64_t T,
                const SearchConfig& cfg) {
  if (T < 2) {
    throw ValidationError("boundary search needs at least 2 frames, got " + std::to_string(T));
  }
  const auto clamp = [T](std::int64_t t) { return std::clamp<std::int64_t>(t, 1, T); };
  const double half = 0.5 * static_cast<double>(T);

  SearchTrace trace;
  std::int64_t t = clamp(roundint(cfg.initial_fraction * static_cast<double>(T)));
  std::int64_t d = roundint(half);

  for (int iteration = 0;; ++iteration) {
    ConfidenceVector p = [&] {
      try {
        return classifier.classify(FrameIndex(t), T);
      } catch (const std::exception& e) {
        trace.result = FrameIndex(t);
        throw SearchError(std::string("classifier failed at frame ") + std::to_string(t) +
                              ": " + e.what(),
                          std::move(trace));
      }
    }();
    const GiClass c = argmax_class(p);
    const double weight = std::max(p[c] - cfg.theta, 0.0) + cfg.epsilon;
    const double dd = static_cast<double>(d);
    const bool right = moves_right(which, c);

    std::int64_t next = 0;
    if (cfg.stride_alpha) {
      const std::int64_t step = roundint(cfg.alpha * dd * weight);
      next = right ? t + step : t - step;
    } else {
      const double move = dd * weight;
      next = roundint(static_cast<double>(t) + (right ? move : -move));
    }

    trace.probes.push_back(ProbeRecord{iteration, FrameIndex(t), d, c, p[c], next - t});
    trace.oracle_calls += 1;

    t = clamp(next);
    d = decay_interval(d, cfg.alpha);
    if (d < 1) break;
  }
  trace.result = FrameIndex(t);
  return trace;
}

}  // namespace

SearchTrace search_boundary(Boundary which, const FrameClassifier& classifier,
                            std::int64_t video_length, const SearchConfig& cfg) {
  cfg.validate();
  return run(which, classifier, video_length, cfg);
}

SearchTrace search_end(const FrameClassifier& classifier, std::int64_t video_length,
                       const SearchConfig& cfg) {
  return search_boundary(Boundary::End, classifier, video_length, cfg);
}

SearchTrace search_start(const FrameClassifier& classifier, std::int64_t video_length,
                         const SearchConfig& cfg) {
  return search_boundary(Boundary::Start, classifier, video_length, cfg);
}

Grounding ground_small_intestine(const FrameClassifier& classifier, std::int64_t video_length,
                                 const SearchConfig& cfg) {
  Grounding g;
  g.start_trace = search_start(classifier, video_length, cfg);
  g.end_trace = search_end(classifier, video_length, cfg);

  auto start = g.start_trace.result;
  auto end = g.end_trace.result;
  if (start > end) {
    std::swap(start, end);
    g.swapped = true;
  }
  g.segment = Segment{start, end};

  auto saw_class2 = [](const SearchTrace& tr) {
    return std::any_of(tr.probes.begin(), tr.probes.end(), [](const ProbeRecord& r) {
      return r.predicted == GiClass::SmallIntestine;
    });
  };
  g.small_intestine_seen = saw_class2(g.start_trace) || saw_class2(g.end_trace);
  return g;
}

ScanResult scan_baseline(const FrameClassifier& classifier, std::int64_t video_length) {
  if (video_length < 2) {
    throw ValidationError("scan needs at least 2 frames, got " + std::to_string(video_length));
  }
  ScanResult out;
  std::int64_t first = 0;
  std::int64_t last = 0;
  for (std::int64_t t = 1; t <= video_length; ++t) {
    const GiClass c = argmax_class(classifier.classify(FrameIndex(t), video_length));
    ++out.oracle_calls;
    if (c == GiClass::SmallIntestine) {
      if (first == 0) first = t;
      last = t;
    }
  }
  if (first != 0) out.segment = Segment{FrameIndex(first), FrameIndex(last)};
  return out;
}

namespace testing {

SearchTrace search_boundary_unchecked(Boundary which, const FrameClassifier& classifier,
                                      std::int64_t video_length, const SearchConfig& cfg) {
  return run(which, classifier, video_length, cfg);
}

}  // namespace testing

}  // namespace ceg::search
