#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "ceg/core.hpp"
#include "ceg/tensor_file.hpp"

namespace ceg::testing {

struct FusionShape {
  std::size_t m = 16;        // feature dimension, multiple of 8
  std::size_t compress = 12;
  std::size_t residual = 10;
  std::size_t hidden = 9;
  int radius = 2;
  bool single_frame = false;
};

/// Gaussian weights with the given scale; deterministic in seed.
inline TensorMap random_weights(const FusionShape& s, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  auto fill = [&](std::vector<std::size_t> shape) {
    Tensor t{std::move(shape), {}};
    t.data.resize(t.element_count());
    for (auto& v : t.data) v = g(rng);
    return t;
  };
  const std::size_t dh = s.m / 8;
  const std::size_t window = static_cast<std::size_t>(2 * s.radius + 1);
  TensorMap w;
  for (const char* p : {"query", "key", "value"}) {
    w[std::string("attention.") + p + ".weight"] = fill({8, dh, s.m});
    w[std::string("attention.") + p + ".bias"] = fill({8, dh});
  }
  w["compress.weight"] = fill({s.compress, s.m});
  w["compress.bias"] = fill({s.compress});
  w["residual.fc1.weight"] = fill({s.residual, s.compress});
  w["residual.fc1.bias"] = fill({s.residual});
  w["residual.fc2.weight"] = fill({s.compress, s.residual});
  w["residual.fc2.bias"] = fill({s.compress});
  w["head.fc1.weight"] = fill({s.hidden, window * s.compress});
  w["head.fc1.bias"] = fill({s.hidden});
  w["head.fc2.weight"] = fill({3, s.hidden});
  w["head.fc2.bias"] = fill({3});
  if (s.single_frame) {
    w["linear.weight"] = fill({3, s.m});
    w["linear.bias"] = fill({3});
  }
  return w;
}

inline std::vector<std::vector<double>> random_features(std::size_t n, std::size_t m,
                                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> f(n, std::vector<double>(m));
  for (auto& row : f)
    for (auto& v : row) v = g(rng);
  return f;
}

inline ConfidenceVector one_hot(GiClass c, double confidence = 1.0) {
  const double rest = (1.0 - confidence) / 2.0;
  std::array<double, 3> p{rest, rest, rest};
  p[slot(c)] = confidence;
  return validate_confidence(p);
}

/// Returns the same vector for every frame.
class ConstantClassifier final : public FrameClassifier {
 public:
  explicit ConstantClassifier(ConfidenceVector p) : p_(p) {}
  ConfidenceVector classify(FrameIndex, std::int64_t) const override { return p_; }

 private:
  ConfidenceVector p_;
};

/// Class from a step layout (class 1 before start, 2 in [start, end],
/// 3 after end) at full confidence, with the answer to the k-th probe
/// replaced by the class that pushes the search the wrong way.
/// Single-threaded: counts probes.
class FlipInjector final : public FrameClassifier {
 public:
  FlipInjector(std::int64_t start, std::int64_t end, bool end_search, int flip_at)
      : start_(start), end_(end), end_search_(end_search), flip_at_(flip_at) {}

  ConfidenceVector classify(FrameIndex t, std::int64_t) const override {
    GiClass c = t.value < start_ ? GiClass::EsophagusStomach
                : t.value <= end_ ? GiClass::SmallIntestine
                                  : GiClass::Colorectum;
    if (calls_++ == flip_at_) {
      if (end_search_) {
        c = c == GiClass::Colorectum ? GiClass::SmallIntestine : GiClass::Colorectum;
      } else {
        c = c == GiClass::EsophagusStomach ? GiClass::SmallIntestine : GiClass::EsophagusStomach;
      }
    }
    return one_hot(c);
  }

 private:
  std::int64_t start_, end_;
  bool end_search_;
  int flip_at_;
  mutable int calls_ = 0;
};

class FailingClassifier final : public FrameClassifier {
 public:
  explicit FailingClassifier(int fail_at) : fail_at_(fail_at) {}
  ConfidenceVector classify(FrameIndex, std::int64_t) const override {
    if (calls_++ == fail_at_) throw std::runtime_error("sensor dropout");
    return one_hot(GiClass::SmallIntestine);
  }

 private:
  int fail_at_;
  mutable int calls_ = 0;
};

}  // namespace ceg::testing
