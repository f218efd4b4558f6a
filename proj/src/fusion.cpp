#include "ceg/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace ceg::fusion {

Vector AffineLayer::apply(std::span<const double> x) const {
  if (x.size() != in) {
    throw ValidationError("affine layer expects input of size " + std::to_string(in) + ", got " +
                          std::to_string(x.size()));
  }
  Vector y(bias);
  for (std::size_t o = 0; o < out; ++o) {
    const double* row = weight.data() + o * in;
    double acc = 0.0;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] += acc;
  }
  return y;
}

namespace {

constexpr std::array<const char*, 3> kProjections = {"query", "key", "value"};

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream s;
  s << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) s << (i ? ", " : "") << shape[i];
  s << ']';
  return s.str();
}

class TensorReader {
 public:
  explicit TensorReader(const TensorMap& tensors) : tensors_(tensors) {}

  const Tensor& get(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ValidationError("fusion weights: missing tensor '" + name + "'");
    used_.insert(name);
    return it->second;
  }

  bool has(const std::string& name) const { return tensors_.contains(name); }

  void expect_shape(const std::string& name, const Tensor& t,
                    const std::vector<std::size_t>& shape) const {
    if (t.shape != shape) {
      throw ValidationError("fusion weights: tensor '" + name + "' has shape " +
                            shape_string(t.shape) + ", expected " + shape_string(shape));
    }
  }

  const Tensor& matrix(const std::string& name) {
    const Tensor& t = get(name);
    if (t.rank() != 2) {
      throw ValidationError("fusion weights: tensor '" + name + "' must be rank 2, has shape " +
                            shape_string(t.shape));
    }
    return t;
  }

  AffineLayer affine(const std::string& prefix, std::optional<std::size_t> in,
                     std::optional<std::size_t> out) {
    const std::string wname = prefix + ".weight";
    const std::string bname = prefix + ".bias";
    const Tensor& w = matrix(wname);
    AffineLayer layer;
    layer.out = w.shape[0];
    layer.in = w.shape[1];
    if ((in && layer.in != *in) || (out && layer.out != *out)) {
      expect_shape(wname, w, {out.value_or(layer.out), in.value_or(layer.in)});
    }
    const Tensor& b = get(bname);
    expect_shape(bname, b, {layer.out});
    layer.weight = w.data;
    layer.bias = b.data;
    return layer;
  }

  void reject_unknown() const {
    for (const auto& [name, _] : tensors_) {
      if (!used_.contains(name)) {
        throw ValidationError("fusion weights: unknown tensor '" + name + "'");
      }
    }
  }

 private:
  const TensorMap& tensors_;
  std::set<std::string> used_;
};

void check_finite(const std::string& name, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError("fusion weights: tensor '" + name + "' is not finite");
  }
}

}  // namespace

FusionWeights FusionWeights::from_tensors(const TensorMap& tensors) {
  for (const auto& [name, t] : tensors) check_finite(name, t.data);

  TensorReader r(tensors);
  FusionWeights w;

  // Attention projections define m; per-head dimension is m/8.
  const std::string q_name = "attention.query.weight";
  const Tensor& q = r.get(q_name);
  if (q.rank() != 3 || q.shape[0] != kHeads) {
    throw ValidationError("fusion weights: tensor '" + q_name + "' must have shape [8, m/8, m], got " +
                          shape_string(q.shape));
  }
  const std::size_t m = q.shape[2];
  const std::size_t dh = q.shape[1];
  if (m % kHeads != 0 || dh * kHeads != m) {
    throw ValidationError("fusion weights: tensor '" + q_name +
                          "' needs m divisible by 8 with head dimension m/8, got " +
                          shape_string(q.shape));
  }
  w.feature_dim_ = m;

  for (std::size_t p = 0; p < kProjections.size(); ++p) {
    const std::string wname = std::string("attention.") + kProjections[p] + ".weight";
    const std::string bname = std::string("attention.") + kProjections[p] + ".bias";
    const Tensor& wt = r.get(wname);
    r.expect_shape(wname, wt, {kHeads, dh, m});
    const Tensor& bt = r.get(bname);
    r.expect_shape(bname, bt, {kHeads, dh});
    for (std::size_t h = 0; h < kHeads; ++h) {
      AffineLayer layer;
      layer.in = m;
      layer.out = dh;
      layer.weight.assign(wt.data.begin() + static_cast<std::ptrdiff_t>(h * dh * m),
                          wt.data.begin() + static_cast<std::ptrdiff_t>((h + 1) * dh * m));
      layer.bias.assign(bt.data.begin() + static_cast<std::ptrdiff_t>(h * dh),
                        bt.data.begin() + static_cast<std::ptrdiff_t>((h + 1) * dh));
      auto& head = w.heads_[h];
      (p == 0 ? head.query : p == 1 ? head.key : head.value) = std::move(layer);
    }
  }

  w.compress_ = r.affine("compress", m, std::nullopt);
  const std::size_t c = w.compress_.out;
  w.residual_fc1_ = r.affine("residual.fc1", c, std::nullopt);
  w.residual_fc2_ = r.affine("residual.fc2", w.residual_fc1_.out, c);

  w.head_fc1_ = r.affine("head.fc1", std::nullopt, std::nullopt);
  if (w.head_fc1_.in % c != 0 || (w.head_fc1_.in / c) % 2 == 0) {
    throw ValidationError("fusion weights: tensor 'head.fc1.weight' input size " +
                          std::to_string(w.head_fc1_.in) + " is not (2N+1)*" + std::to_string(c));
  }
  w.window_ = w.head_fc1_.in / c;
  w.head_fc2_ = r.affine("head.fc2", w.head_fc1_.out, 3);

  if (r.has("linear.weight") || r.has("linear.bias")) {
    w.linear_ = r.affine("linear", m, 3);
  }
  r.reject_unknown();
  return w;
}

FusionWeights FusionWeights::load(const std::filesystem::path& path) {
  return from_tensors(load_tensor_file(path));
}

TensorMap FusionWeights::to_tensors() const {
  TensorMap out;
  const std::size_t m = feature_dim_;
  const std::size_t dh = head_dim();
  for (std::size_t p = 0; p < kProjections.size(); ++p) {
    Tensor wt{{kHeads, dh, m}, {}};
    Tensor bt{{kHeads, dh}, {}};
    for (const auto& head : heads_) {
      const AffineLayer& layer = p == 0 ? head.query : p == 1 ? head.key : head.value;
      wt.data.insert(wt.data.end(), layer.weight.begin(), layer.weight.end());
      bt.data.insert(bt.data.end(), layer.bias.begin(), layer.bias.end());
    }
    out[std::string("attention.") + kProjections[p] + ".weight"] = std::move(wt);
    out[std::string("attention.") + kProjections[p] + ".bias"] = std::move(bt);
  }
  auto put = [&out](const std::string& prefix, const AffineLayer& l) {
    out[prefix + ".weight"] = Tensor{{l.out, l.in}, l.weight};
    out[prefix + ".bias"] = Tensor{{l.out}, l.bias};
  };
  put("compress", compress_);
  put("residual.fc1", residual_fc1_);
  put("residual.fc2", residual_fc2_);
  put("head.fc1", head_fc1_);
  put("head.fc2", head_fc2_);
  if (linear_) put("linear", *linear_);
  return out;
}

namespace {

// Sums in ascending order, so the result depends only on the multiset of
// terms. Reordering the window therefore reorders the outputs bit for bit.
double order_free_sum(std::span<double> terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum;
}

}  // namespace

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - mx);
  Vector terms = out;
  const double sum = order_free_sum(terms);
  for (auto& v : out) v /= sum;
  return out;
}

AttentionMatrix attention_scores(std::span<const Vector> queries, std::span<const Vector> keys,
                                 std::size_t scale_dim) {
  if (queries.size() != keys.size() || queries.empty()) {
    throw ValidationError("attention: " + std::to_string(queries.size()) + " queries vs " +
                          std::to_string(keys.size()) + " keys");
  }
  if (scale_dim == 0) throw ValidationError("attention: scale dimension must be positive");
  const std::size_t n = queries.size();
  const std::size_t dim = queries[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    if (queries[i].size() != dim || keys[i].size() != dim) {
      throw ValidationError("attention: vector " + std::to_string(i) + " has dimension " +
                            std::to_string(queries[i].size()) + "/" +
                            std::to_string(keys[i].size()) + ", expected " +
                            std::to_string(dim));
    }
  }

  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(scale_dim));
  std::vector<double> a(n * n);
  Vector raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < dim; ++c) dot += queries[i][c] * keys[j][c];
      raw[j] = dot * inv_scale;
    }
    const Vector row = softmax(raw);
    std::copy(row.begin(), row.end(), a.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return AttentionMatrix(n, std::move(a));
}

namespace {

void check_window(std::span<const Vector> window, const FusionWeights& w, bool exact_length) {
  if (window.empty() || (exact_length && window.size() != w.window())) {
    throw ValidationError("fusion: window has " + std::to_string(window.size()) +
                          " frames, weights expect " + std::to_string(w.window()));
  }
  for (std::size_t i = 0; i < window.size(); ++i) {
    if (window[i].size() != w.feature_dim()) {
      throw ValidationError("fusion: feature " + std::to_string(i) + " has dimension " +
                            std::to_string(window[i].size()) + ", weights expect " +
                            std::to_string(w.feature_dim()));
    }
  }
}

std::vector<Vector> attend_unchecked(std::span<const Vector> window, const FusionWeights& w) {
  const std::size_t n = window.size();
  const std::size_t dh = w.head_dim();
  std::vector<Vector> concat(n, Vector(w.feature_dim(), 0.0));

  std::vector<Vector> q(n), k(n), v(n);
  Vector terms(n);
  for (std::size_t h = 0; h < FusionWeights::kHeads; ++h) {
    const auto& proj = w.heads()[h];
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = proj.query.apply(window[i]);
      k[i] = proj.key.apply(window[i]);
      v[i] = proj.value.apply(window[i]);
    }
    const AttentionMatrix a = attention_scores(q, k, w.feature_dim());
    for (std::size_t i = 0; i < n; ++i) {
      double* dst = concat[i].data() + h * dh;
      for (std::size_t c = 0; c < dh; ++c) {
        for (std::size_t j = 0; j < n; ++j) terms[j] = a(i, j) * v[j][c];
        dst[c] = order_free_sum(terms);
      }
    }
  }
  return concat;
}

void relu_inplace(Vector& x) {
  for (auto& v : x) v = std::max(v, 0.0);
}

std::vector<Vector> fused_unchecked(std::span<const Vector> window, const FusionWeights& w) {
  std::vector<Vector> out = attend_unchecked(window, w);
  for (auto& f : out) {
    Vector x = w.compress().apply(f);
    Vector hidden = w.residual_fc1().apply(x);
    relu_inplace(hidden);
    const Vector delta = w.residual_fc2().apply(hidden);
    for (std::size_t c = 0; c < x.size(); ++c) x[c] += delta[c];
    f = std::move(x);
  }
  return out;
}

}  // namespace

std::vector<Vector> attend(std::span<const Vector> window, const FusionWeights& w) {
  check_window(window, w, false);
  return attend_unchecked(window, w);
}

std::vector<Vector> fused_features(std::span<const Vector> window, const FusionWeights& w) {
  check_window(window, w, false);
  return fused_unchecked(window, w);
}

ConfidenceVector fuse_window(std::span<const Vector> window, const FusionWeights& w) {
  check_window(window, w, true);
  const std::vector<Vector> fused = fused_unchecked(window, w);
  Vector flat;
  flat.reserve(w.head_fc1().in);
  for (const auto& f : fused) flat.insert(flat.end(), f.begin(), f.end());
  Vector hidden = w.head_fc1().apply(flat);
  relu_inplace(hidden);
  const Vector p = softmax(w.head_fc2().apply(hidden));
  return validate_confidence({p[0], p[1], p[2]});
}

ConfidenceVector linear_head(std::span<const double> feature, const AffineLayer& layer) {
  if (layer.out != 3) {
    throw ValidationError("linear head must produce 3 logits, layer has " +
                          std::to_string(layer.out));
  }
  const Vector p = softmax(layer.apply(feature));
  return validate_confidence({p[0], p[1], p[2]});
}

double cross_entropy(const ConfidenceVector& p, GiClass truth) {
  return -std::log(std::max(p[truth], 1e-12));
}

}  // namespace ceg::fusion
