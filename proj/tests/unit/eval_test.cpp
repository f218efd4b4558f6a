#include <doctest.h>

#include <cmath>
#include <random>

#include "ceg/eval.hpp"
#include "ceg/oracle_sim.hpp"

using namespace ceg;
using namespace ceg::eval;

namespace {
Segment seg(std::int64_t a, std::int64_t b) { return Segment{FrameIndex(a), FrameIndex(b)}; }
}  // namespace

TEST_CASE("segment_iou examples") {
  CHECK(segment_iou(seg(10, 20), seg(12, 22)) == 9.0 / 13.0);
  CHECK(segment_iou(seg(10, 20), seg(12, 22)) == doctest::Approx(0.6923).epsilon(1e-4));
  CHECK(segment_iou(seg(7, 300), seg(7, 300)) == 1.0);
  CHECK(segment_iou(seg(1, 5), seg(10, 20)) == 0.0);
  CHECK(segment_iou(seg(1, 5), seg(6, 9)) == 0.0);
  CHECK(segment_iou(seg(1, 5), seg(5, 9)) == 1.0 / 9.0);
  CHECK(segment_iou(seg(3, 3), seg(3, 3)) == 1.0);
}

TEST_CASE("segment_iou is symmetric and 1 only for identical segments") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int64_t> pos(1, 60);
  for (int trial = 0; trial < 5000; ++trial) {
    std::int64_t a = pos(rng), b = pos(rng), c = pos(rng), d = pos(rng);
    const Segment p = seg(std::min(a, b), std::max(a, b));
    const Segment q = seg(std::min(c, d), std::max(c, d));
    const double iou = segment_iou(p, q);
    CHECK(iou == segment_iou(q, p));
    CHECK(iou >= 0.0);
    CHECK(iou <= 1.0);
    CHECK((iou == 1.0) == (p == q));
  }
}

TEST_CASE("micro and macro accuracy") {
  const std::array<ClassTally, 3> t{{{10, 9}, {10, 8}, {20, 10}}};
  const auto acc = micro_macro_accuracy(t);
  CHECK(acc.micro == 27.0 / 40.0);
  CHECK(acc.micro == doctest::Approx(0.675).epsilon(1e-12));
  CHECK(acc.macro == doctest::Approx((0.9 + 0.8 + 0.5) / 3.0).epsilon(1e-12));
  CHECK(acc.macro == doctest::Approx(0.7333).epsilon(1e-4));

  const std::array<ClassTally, 3> perfect{{{5, 5}, {7, 7}, {1, 1}}};
  CHECK(micro_macro_accuracy(perfect).micro == 1.0);
  CHECK(micro_macro_accuracy(perfect).macro == 1.0);

  const std::array<ClassTally, 3> missing{{{5, 5}, {0, 0}, {1, 1}}};
  CHECK_THROWS_AS(micro_macro_accuracy(missing), ValidationError);
  CHECK(micro_accuracy(missing) == 1.0);

  const std::array<ClassTally, 3> bad{{{5, 6}, {1, 1}, {1, 1}}};
  CHECK_THROWS_AS(micro_accuracy(bad), ValidationError);
}

TEST_CASE("micro equals macro when classes are balanced") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> n(1, 500);
  for (int trial = 0; trial < 500; ++trial) {
    const std::int64_t size = n(rng);
    std::uniform_int_distribution<std::int64_t> c(0, size);
    const std::array<ClassTally, 3> t{{{size, c(rng)}, {size, c(rng)}, {size, c(rng)}}};
    const auto acc = micro_macro_accuracy(t);
    CHECK(acc.micro == doctest::Approx(acc.macro).epsilon(1e-12));
  }
}

TEST_CASE("published per-class accuracies give a macro average near the table value") {
  // Diagonal of the fused confusion matrix; informational comparison only.
  const double macro = (0.924 + 0.931 + 0.923) / 3.0;
  CHECK(macro == doctest::Approx(0.926).epsilon(1e-3));
  CHECK(std::abs(macro - 0.911) < 0.02);
}

TEST_CASE("confusion_estimate") {
  SUBCASE("all correct gives the identity") {
    std::vector<Prediction> p;
    for (GiClass c : kAllClasses)
      for (int i = 0; i < 4; ++i) p.push_back({c, c});
    const auto m = confusion_estimate(p);
    for (GiClass a : kAllClasses)
      for (GiClass b : kAllClasses) CHECK(m(a, b) == (a == b ? 1.0 : 0.0));
  }
  SUBCASE("single sample column") {
    std::vector<Prediction> p{{GiClass::EsophagusStomach, GiClass::EsophagusStomach},
                              {GiClass::SmallIntestine, GiClass::SmallIntestine},
                              {GiClass::SmallIntestine, GiClass::Colorectum}};
    const auto col = confusion_estimate(p).column(GiClass::Colorectum);
    CHECK(col == std::array<double, 3>{0.0, 1.0, 0.0});
  }
  SUBCASE("empty column") {
    std::vector<Prediction> p{{GiClass::SmallIntestine, GiClass::Colorectum}};
    CHECK_THROWS_AS(confusion_estimate(p), ValidationError);
  }
  SUBCASE("round trip through the noisy oracle") {
    constexpr std::int64_t n = 30000;
    const auto layout = sim::VideoLayout::checked(3 * n, n + 1, 2 * n);
    sim::NoisyOracleConfig cfg;
    cfg.matrix = ConfusionMatrix::resnet();
    cfg.seed = 8;
    const sim::NoisyOracle oracle(layout, cfg);
    std::vector<Prediction> p;
    for (std::int64_t t = 1; t <= 3 * n; ++t) {
      p.push_back({argmax_class(oracle.classify(FrameIndex(t), 3 * n)),
                   layout.class_at(FrameIndex(t))});
    }
    const auto m = confusion_estimate(p);
    for (GiClass a : kAllClasses)
      for (GiClass b : kAllClasses) CHECK(std::abs(m(a, b) - cfg.matrix(a, b)) < 0.01);
  }
}

TEST_CASE("deviation_summary") {
  SUBCASE("all zeros") {
    const std::vector<double> v{0, 0, 0, 0};
    const auto s = deviation_summary(v);
    CHECK(s.median == 0);
    CHECK(s.lower_quartile == 0);
    CHECK(s.upper_quartile == 0);
    CHECK(s.mean == 0);
    CHECK(s.whisker_low == 0);
    CHECK(s.whisker_high == 0);
  }
  SUBCASE("1..5 with linear interpolation") {
    const std::vector<double> v{5, 3, 1, 4, 2};
    const auto s = deviation_summary(v);
    CHECK(s.median == 3);
    CHECK(s.lower_quartile == 2);
    CHECK(s.upper_quartile == 4);
    CHECK(s.mean == 3);
    CHECK(s.whisker_low == 1);
    CHECK(s.whisker_high == 5);
  }
  SUBCASE("interpolation between order statistics") {
    // h = 3 * 0.25 = 0.75 -> 10 + 0.75 * 10
    const std::vector<double> v{10, 20, 30, 40};
    const auto s = deviation_summary(v);
    CHECK(s.lower_quartile == 17.5);
    CHECK(s.median == 25);
    CHECK(s.upper_quartile == 32.5);
  }
  SUBCASE("a single outlier pulls the mean past the whisker") {
    std::vector<double> v;
    for (int i = 0; i < 99; ++i) v.push_back(i % 101);
    v.push_back(5000);
    const auto s = deviation_summary(v);
    CHECK(s.whisker_high <= 100);
    CHECK(s.mean > s.median);
    CHECK(s.lower_quartile <= s.median);
    CHECK(s.median <= s.upper_quartile);
    CHECK(s.mean == doctest::Approx((4851.0 + 5000.0) / 100.0));
  }
  SUBCASE("whisker never enters the box") {
    const std::vector<double> v{0, 100, 100.1, 100.2};
    const auto s = deviation_summary(v);
    CHECK(s.lower_quartile == 75);
    CHECK(s.whisker_low == 75);
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(deviation_summary(std::vector<double>{}), ValidationError);
  }
}

TEST_CASE("quartile ordering holds for random data") {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> e(0.01);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(1 + trial % 37);
    for (auto& x : v) x = e(rng);
    const auto s = deviation_summary(v);
    CHECK(s.whisker_low <= s.lower_quartile);
    CHECK(s.lower_quartile <= s.median);
    CHECK(s.median <= s.upper_quartile);
    CHECK(s.upper_quartile <= s.whisker_high);
  }
}

TEST_CASE("evaluate_grounding") {
  const auto r = evaluate_grounding(seg(700, 5215), seg(721, 5210), 140);
  CHECK(r.start_error == 21);
  CHECK(r.end_error == 5);
  CHECK(r.iou == 4490.0 / 4516.0);
  CHECK(r.oracle_calls == 140);
}
