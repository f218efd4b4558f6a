#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ceg/fusion.hpp"
#include "fusion_scratch.hpp"
#include "test_helpers.hpp"

using namespace ceg;
using namespace ceg::fusion;
using ceg::testing::FusionShape;
using ceg::testing::random_features;
using ceg::testing::random_weights;

namespace {

std::string error_of(const TensorMap& t) {
  try {
    FusionWeights::from_tensors(t);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("attention_scores examples") {
  SUBCASE("zero queries and keys give uniform rows") {
    std::vector<Vector> q(5, Vector(4, 0.0));
    const auto a = attention_scores(q, q, 4);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) CHECK(a(i, j) == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("a single frame attends to itself") {
    std::vector<Vector> q{{0.3, -2.0}};
    std::vector<Vector> k{{1.5, 4.0}};
    const auto a = attention_scores(q, k, 2);
    CHECK(a.size() == 1);
    CHECK(a(0, 0) == 1.0);
  }
  SUBCASE("two frames, m = 1") {
    std::vector<Vector> q{{1.0}, {0.0}};
    std::vector<Vector> k{{1.0}, {0.0}};
    const auto a = attention_scores(q, k, 1);
    const double e = std::exp(1.0);
    CHECK(a(0, 0) == doctest::Approx(e / (e + 1)).epsilon(1e-14));
    CHECK(a(0, 1) == doctest::Approx(1 / (e + 1)).epsilon(1e-14));
    CHECK(a(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(a(1, 0) == doctest::Approx(0.5));
    CHECK(a(1, 1) == doctest::Approx(0.5));
  }
  SUBCASE("dimension mismatch") {
    std::vector<Vector> q{{1.0, 2.0}, {0.0, 1.0}};
    std::vector<Vector> k{{1.0}, {0.0}};
    CHECK_THROWS_AS(attention_scores(q, k, 2), ValidationError);
    std::vector<Vector> k3{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(attention_scores(q, k3, 2), ValidationError);
  }
}

TEST_CASE("attention rows are distributions for random inputs") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_int_distribution<int> radius(0, 6);
  std::uniform_int_distribution<std::size_t> dim(1, 16);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = static_cast<std::size_t>(2 * radius(rng) + 1);
    const std::size_t m = dim(rng);
    std::vector<Vector> q(n, Vector(m)), k(n, Vector(m));
    for (auto& v : q)
      for (auto& x : v) x = g(rng);
    for (auto& v : k)
      for (auto& x : v) x = g(rng);
    const auto a = attention_scores(q, k, m);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = a.row(i);
      const double sum = std::accumulate(row.begin(), row.end(), 0.0);
      CHECK(std::abs(sum - 1.0) <= 1e-6);
      for (double v : row) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
}

TEST_CASE("softmax ignores a constant shift") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 4.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector x(7);
    for (auto& v : x) v = g(rng);
    const double c = g(rng) * 100.0;
    Vector shifted = x;
    for (auto& v : shifted) v += c;
    const Vector a = softmax(x);
    const Vector b = softmax(shifted);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  // Large logits stay finite.
  const Vector big = softmax(std::vector<double>{1000.0, 1000.0});
  CHECK(big[0] == 0.5);
}

TEST_CASE("linear_head") {
  AffineLayer layer{4, 3, std::vector<double>(12, 0.0), {0.0, 0.0, 0.0}};
  const Vector f{0.3, -1.0, 2.0, 0.5};
  SUBCASE("zero weights give the uniform vector") {
    const auto p = linear_head(f, layer);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
  SUBCASE("log biases reproduce their ratios") {
    layer.bias = {std::log(1.0), std::log(2.0), std::log(3.0)};
    const auto p = linear_head(f, layer);
    CHECK(p.at(0) == doctest::Approx(1.0 / 6).epsilon(1e-14));
    CHECK(p.at(1) == doctest::Approx(2.0 / 6).epsilon(1e-14));
    CHECK(p.at(2) == doctest::Approx(3.0 / 6).epsilon(1e-14));
  }
  SUBCASE("adding c to every logit changes nothing") {
    layer.weight = {0.1, 0.2, -0.3, 0.4, 1.0, 0.0, 0.5, -0.5, -0.2, 0.3, 0.1, 0.9};
    const auto p = linear_head(f, layer);
    for (auto& b : layer.bias) b += 17.5;
    const auto q = linear_head(f, layer);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p.at(i) == doctest::Approx(q.at(i)).epsilon(1e-12));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(linear_head(Vector{1.0, 2.0}, layer), ValidationError);
  }
}

TEST_CASE("cross_entropy") {
  CHECK(cross_entropy(validate_confidence({1, 0, 0}), GiClass::EsophagusStomach) == 0.0);
  for (GiClass c : kAllClasses) {
    CHECK(cross_entropy(validate_confidence({1.0 / 3, 1.0 / 3, 1.0 / 3}), c) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  CHECK(cross_entropy(validate_confidence({0.5, 0.25, 0.25}), GiClass::SmallIntestine) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(cross_entropy(validate_confidence({1, 0, 0}), GiClass::Colorectum) ==
        doctest::Approx(-std::log(1e-12)));
}

namespace {

// Weights where attention is uniform (zero query/key), value projection is
// the identity, compression is the identity, the residual branch is zero
// and the head copies the centre frame's first 3 fused features.
TensorMap isolating_weights(std::size_t m, int radius) {
  FusionShape shape{m, m, 4, 3, radius};
  TensorMap w = random_weights(shape, 1);
  const std::size_t dh = m / 8;
  const std::size_t window = static_cast<std::size_t>(2 * radius + 1);
  for (auto& [name, t] : w) std::fill(t.data.begin(), t.data.end(), 0.0);
  auto& value = w["attention.value.weight"].data;
  for (std::size_t h = 0; h < 8; ++h)
    for (std::size_t d = 0; d < dh; ++d) value[(h * dh + d) * m + (h * dh + d)] = 1.0;
  auto& compress = w["compress.weight"].data;
  for (std::size_t i = 0; i < m; ++i) compress[i * m + i] = 1.0;
  auto& fc1 = w["head.fc1.weight"].data;
  const std::size_t centre = static_cast<std::size_t>(radius) * m;
  for (std::size_t i = 0; i < 3; ++i) fc1[i * window * m + centre + i] = 1.0;
  auto& fc2 = w["head.fc2.weight"].data;
  for (std::size_t i = 0; i < 3; ++i) fc2[i * 3 + i] = 1.0;
  return w;
}

}  // namespace

TEST_CASE("fuse_window with weights that isolate the head") {
  const std::size_t m = 16;
  SUBCASE("single frame window") {
    const auto w = FusionWeights::from_tensors(isolating_weights(m, 0));
    Vector f(m, 0.0);
    f[1] = 1.0;
    const auto p = fuse_window(std::vector<Vector>{f}, w);
    const Vector expected = softmax(std::vector<double>{0.0, 1.0, 0.0});
    for (std::size_t i = 0; i < 3; ++i) CHECK(p.at(i) == doctest::Approx(expected[i]).epsilon(1e-14));
  }
  SUBCASE("window of identical frames") {
    const auto w = FusionWeights::from_tensors(isolating_weights(m, 2));
    Vector f(m, 0.0);
    f[2] = 1.0;
    const auto p = fuse_window(std::vector<Vector>(5, f), w);
    const Vector expected = softmax(std::vector<double>{0.0, 0.0, 1.0});
    for (std::size_t i = 0; i < 3; ++i) CHECK(p.at(i) == doctest::Approx(expected[i]).epsilon(1e-14));
  }
}

TEST_CASE("fuse_window agrees with the scratch implementation") {
  std::mt19937_64 seeds(20240601);
  std::uniform_int_distribution<int> radius(0, 6);
  std::uniform_int_distribution<int> width(1, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    FusionShape shape;
    shape.m = 8 * static_cast<std::size_t>(width(seeds));
    shape.compress = 4 + static_cast<std::size_t>(width(seeds));
    shape.residual = 3 + static_cast<std::size_t>(width(seeds));
    shape.hidden = 2 + static_cast<std::size_t>(width(seeds));
    shape.radius = radius(seeds);
    const auto tensors = random_weights(shape, seeds());
    const auto window = random_features(static_cast<std::size_t>(2 * shape.radius + 1), shape.m,
                                        seeds());
    const auto w = FusionWeights::from_tensors(tensors);
    const auto p = fuse_window(window, w);
    const auto expected = ceg::testing::scratch_fuse(tensors, window);
    CHECK(p.at(0) + p.at(1) + p.at(2) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < 3; ++i) worst = std::max(worst, std::abs(p.at(i) - expected[i]));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("attention stage is permutation equivariant") {
  FusionShape shape;
  shape.radius = 3;
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = FusionWeights::from_tensors(random_weights(shape, rng()));
    const auto window = random_features(7, shape.m, rng());
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Vector> permuted(7);
    for (std::size_t i = 0; i < 7; ++i) permuted[i] = window[perm[i]];

    const auto base = attend(window, w);
    const auto moved = attend(permuted, w);
    const auto fused_base = fused_features(window, w);
    const auto fused_moved = fused_features(permuted, w);
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t c = 0; c < base[i].size(); ++c) {
        CHECK(moved[i][c] == base[perm[i]][c]);
      }
      for (std::size_t c = 0; c < fused_base[i].size(); ++c) {
        CHECK(fused_moved[i][c] == fused_base[perm[i]][c]);
      }
    }
  }
}

TEST_CASE("fuse_window input validation") {
  FusionShape shape;
  const auto w = FusionWeights::from_tensors(random_weights(shape, 3));
  CHECK(w.window() == 5);
  CHECK(w.radius() == 2);
  CHECK(w.feature_dim() == 16);
  CHECK(w.head_dim() == 2);
  CHECK_THROWS_AS(fuse_window(random_features(3, 16, 1), w), ValidationError);
  CHECK_THROWS_AS(fuse_window(random_features(5, 8, 1), w), ValidationError);
}

TEST_CASE("weight loading rejects inconsistent files") {
  FusionShape shape;
  const TensorMap good = random_weights(shape, 4);
  CHECK_NOTHROW(FusionWeights::from_tensors(good));

  SUBCASE("missing tensor") {
    TensorMap t = good;
    t.erase("residual.fc2.bias");
    CHECK(error_of(t).find("residual.fc2.bias") != std::string::npos);
  }
  SUBCASE("unknown tensor") {
    TensorMap t = good;
    t["positional.embedding"] = Tensor{{2}, {0.0, 1.0}};
    CHECK(error_of(t).find("positional.embedding") != std::string::npos);
  }
  SUBCASE("shape mismatch names the tensor") {
    TensorMap t = good;
    t["residual.fc2.weight"] = Tensor{{11, 10}, std::vector<double>(110, 0.0)};
    CHECK(error_of(t).find("residual.fc2.weight") != std::string::npos);
    t = good;
    t["attention.key.bias"] = Tensor{{8, 3}, std::vector<double>(24, 0.0)};
    CHECK(error_of(t).find("attention.key.bias") != std::string::npos);
  }
  SUBCASE("feature dimension must split into 8 heads") {
    TensorMap t = good;
    t["attention.query.weight"] = Tensor{{8, 2, 12}, std::vector<double>(192, 0.0)};
    CHECK(error_of(t).find("attention.query.weight") != std::string::npos);
  }
  SUBCASE("head input must be an odd number of fused frames") {
    TensorMap t = good;
    t["head.fc1.weight"] = Tensor{{9, 48}, std::vector<double>(9 * 48, 0.0)};
    CHECK(error_of(t).find("head.fc1.weight") != std::string::npos);
  }
  SUBCASE("non-finite values") {
    TensorMap t = good;
    t["compress.bias"].data[0] = std::nan("");
    CHECK(error_of(t).find("compress.bias") != std::string::npos);
  }
  SUBCASE("optional single-frame head") {
    shape.single_frame = true;
    const auto w = FusionWeights::from_tensors(random_weights(shape, 5));
    REQUIRE(w.single_frame_head());
    CHECK(w.single_frame_head()->in == 16);
    TensorMap t = random_weights(shape, 5);
    t.erase("linear.bias");
    CHECK(error_of(t).find("linear.bias") != std::string::npos);
  }
}

TEST_CASE("tensor files round-trip through text") {
  FusionShape shape;
  shape.single_frame = true;
  const TensorMap original = random_weights(shape, 8);
  std::stringstream buf;
  write_tensor_file(buf, original);
  const TensorMap back = read_tensor_file(buf);
  REQUIRE(back.size() == original.size());
  for (const auto& [name, t] : original) {
    CHECK(back.at(name).shape == t.shape);
    CHECK(back.at(name).data == t.data);
  }
  const auto w = FusionWeights::from_tensors(back);
  CHECK(w.to_tensors().size() == original.size());
  for (const auto& [name, t] : w.to_tensors()) CHECK(original.at(name).data == t.data);
}

TEST_CASE("tensor file parse errors carry line numbers") {
  {
    std::istringstream in("tensor a 2 2 2\n1 2\n3 x\n");
    try {
      read_tensor_file(in, "w.txt");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("w.txt:3") != std::string::npos);
    }
  }
  {
    std::istringstream in("# header\ntensor a 1 3\n1 2\n");
    CHECK_THROWS_AS(read_tensor_file(in), FormatError);
  }
  {
    std::istringstream in("tensor a 1 1\n1\ntensor a 1 1\n2\n");
    CHECK_THROWS_AS(read_tensor_file(in), FormatError);
  }
  {
    std::istringstream in("matrix a 1 1\n1\n");
    CHECK_THROWS_AS(read_tensor_file(in), FormatError);
  }
  {
    std::istringstream in("tensor a 1 3 # comment\n1 2 # more\n  3\n");
    const auto t = read_tensor_file(in);
    CHECK(t.at("a").data == std::vector<double>{1, 2, 3});
  }
}
