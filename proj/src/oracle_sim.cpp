#include "ceg/oracle_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

namespace ceg::sim {

VideoLayout VideoLayout::checked(std::int64_t frames, std::int64_t start, std::int64_t end) {
  if (!(1 <= start && start <= end && end <= frames)) {
    std::ostringstream msg;
    msg << "invalid layout: T=" << frames << " t_s=" << start << " t_e=" << end;
    throw ValidationError(msg.str());
  }
  return VideoLayout{frames, start, end};
}

GiClass VideoLayout::class_at(FrameIndex t) const {
  if (t.value < start) return GiClass::EsophagusStomach;
  if (t.value <= end) return GiClass::SmallIntestine;
  return GiClass::Colorectum;
}

namespace {

std::int64_t round_frames(double x) { return static_cast<std::int64_t>(std::round(x)); }

// SplitMix64. A fresh generator is built for every frame, so construction
// has to be cheap; mt19937_64 spends most of a draw filling its state.
class FrameRng {
 public:
  using result_type = std::uint64_t;
  FrameRng(std::uint64_t seed, std::uint64_t stream) : state_(seed) {
    state_ = (*this)() ^ stream;
    (*this)();
  }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

double unit_uniform(FrameRng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

FrameRng seeded(std::uint64_t seed, std::uint64_t stream) { return FrameRng(seed, stream); }

constexpr std::uint64_t kLayoutStream = 0x6c61796f75740000ULL;

}  // namespace

VideoLayout generate_layout(std::int64_t frames, const std::array<double, 3>& proportions,
                            double jitter, std::uint64_t seed) {
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!std::isfinite(proportions[i]) || proportions[i] <= 0.0) {
      throw ValidationError("layout proportion " + std::to_string(i + 1) +
                            " must be positive (every region needs frames)");
    }
    sum += proportions[i];
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ValidationError("layout proportions must sum to 1, got " + std::to_string(sum));
  }
  if (!(jitter >= 0.0 && jitter < 1.0)) {
    throw ValidationError("layout jitter must lie in [0, 1), got " + std::to_string(jitter));
  }

  std::array<double, 3> p = proportions;
  if (jitter > 0.0) {
    auto rng = seeded(seed, kLayoutStream);
    double total = 0.0;
    for (auto& v : p) {
      v *= 1.0 + jitter * (2.0 * unit_uniform(rng) - 1.0);
      total += v;
    }
    for (auto& v : p) v /= total;
  }

  const auto fT = static_cast<double>(frames);
  const std::int64_t first = round_frames(p[0] * fT);
  const std::int64_t last = round_frames((p[0] + p[1]) * fT);
  if (first < 1 || last < first + 1 || last > frames - 1) {
    throw ValidationError("T=" + std::to_string(frames) +
                          " is too small for three non-empty regions at these proportions");
  }
  return VideoLayout{frames, first + 1, last};
}

VideoLayout read_layout(std::istream& in) {
  std::int64_t T = 0, ts = 0, te = 0;
  if (!(in >> T >> ts >> te)) throw FormatError("layout file must contain 'T t_s t_e'");
  std::string extra;
  if (in >> extra) throw FormatError("layout file has trailing data '" + extra + "'");
  return VideoLayout::checked(T, ts, te);
}

VideoLayout load_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open layout file " + path.string());
  return read_layout(in);
}

void write_layout(std::ostream& out, const VideoLayout& layout) {
  out << layout.frames << ' ' << layout.start << ' ' << layout.end << '\n';
}

void save_layout(const std::filesystem::path& path, const VideoLayout& layout) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write layout file " + path.string());
  write_layout(out, layout);
}

namespace {

void check_probe(FrameIndex t, std::int64_t video_length, std::int64_t frames) {
  if (video_length != frames) {
    throw ValidationError("classifier built for " + std::to_string(frames) +
                          " frames probed with video length " + std::to_string(video_length));
  }
  if (t.value < 1 || t.value > frames) {
    throw ValidationError("probe at frame " + std::to_string(t.value) + " outside [1, " +
                          std::to_string(frames) + "]");
  }
}

ConfidenceVector peaked(GiClass c, double confidence) {
  const double rest = (1.0 - confidence) / 2.0;
  std::array<double, 3> p{rest, rest, rest};
  p[slot(c)] = confidence;
  return validate_confidence(p);
}

}  // namespace

PerfectOracle::PerfectOracle(VideoLayout layout, double confidence)
    : layout_(layout), confidence_(confidence) {
  if (!(confidence > 1.0 / 3.0 && confidence <= 1.0)) {
    throw ValidationError("perfect oracle confidence must lie in (1/3, 1], got " +
                          std::to_string(confidence));
  }
}

ConfidenceVector PerfectOracle::classify(FrameIndex t, std::int64_t video_length) const {
  check_probe(t, video_length, layout_.frames);
  return peaked(layout_.class_at(t), confidence_);
}

void ConfidenceModel::validate() const {
  if (kind == Kind::Fixed) {
    if (!(mean > 1.0 / 3.0 && mean <= 1.0)) {
      throw ValidationError("fixed confidence must lie in (1/3, 1], got " + std::to_string(mean));
    }
    return;
  }
  if (!(mean > 1.0 / 3.0 && mean < 1.0)) {
    throw ValidationError("beta confidence mean must lie in (1/3, 1), got " + std::to_string(mean));
  }
  if (!(concentration > 0.0) || !std::isfinite(concentration)) {
    throw ValidationError("beta concentration must be positive");
  }
}

NoisyOracle::NoisyOracle(VideoLayout layout, NoisyOracleConfig cfg)
    : layout_(layout), cfg_(std::move(cfg)) {
  cfg_.confidence.validate();
}

namespace {

GiClass draw_class(FrameRng& rng, const std::array<double, 3>& column) {
  const double u = unit_uniform(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    acc += column[i];
    if (u < acc) return static_cast<GiClass>(i + 1);
  }
  return GiClass::Colorectum;
}

}  // namespace

GiClass NoisyOracle::predicted_class(FrameIndex t) const {
  auto rng = seeded(cfg_.seed, static_cast<std::uint64_t>(t.value));
  return draw_class(rng, cfg_.matrix.column(layout_.class_at(t)));
}

ConfidenceVector NoisyOracle::classify(FrameIndex t, std::int64_t video_length) const {
  check_probe(t, video_length, layout_.frames);
  auto rng = seeded(cfg_.seed, static_cast<std::uint64_t>(t.value));
  const GiClass c = draw_class(rng, cfg_.matrix.column(layout_.class_at(t)));

  const auto& model = cfg_.confidence;
  double confidence = model.mean;
  if (model.kind == ConfidenceModel::Kind::Beta) {
    // Beta on (1/3, 1) with the requested mean, via two gamma draws.
    constexpr double lo = 1.0 / 3.0;
    const double mu = (model.mean - lo) / (1.0 - lo);
    std::gamma_distribution<double> ga(mu * model.concentration, 1.0);
    std::gamma_distribution<double> gb((1.0 - mu) * model.concentration, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    const double b = (x + y) > 0.0 ? x / (x + y) : mu;
    confidence = std::clamp(lo + (1.0 - lo) * b, lo + 1e-9, 1.0);
  }
  return peaked(c, confidence);
}

namespace {

// Collects records keyed by 1-based frame index and checks that they cover
// 1..T exactly once.
template <typename T>
class FrameRecords {
 public:
  explicit FrameRecords(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(std::size_t line, const std::string& what) const {
    throw FormatError(source_ + ":" + std::to_string(line) + ": " + what);
  }

  void add(std::size_t line, std::int64_t frame, T value) {
    if (frame < 1) fail(line, "frame index " + std::to_string(frame) + " is not positive");
    auto [it, inserted] = records_.try_emplace(frame, std::move(value));
    if (!inserted) fail(line, "duplicate frame " + std::to_string(frame));
  }

  std::vector<T> finish() && {
    if (records_.empty()) throw FormatError(source_ + ": no frame records");
    std::vector<T> out;
    out.reserve(records_.size());
    std::int64_t expected = 1;
    for (auto& [frame, value] : records_) {
      if (frame != expected) {
        throw FormatError(source_ + ": missing frame " + std::to_string(expected));
      }
      out.push_back(std::move(value));
      ++expected;
    }
    return out;
  }

 private:
  std::string source_;
  std::map<std::int64_t, T> records_;
};

bool parse_number(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

bool parse_index(std::string_view s, std::int64_t& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

std::string strip_comment(std::string line) {
  if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  if (line.find_first_not_of(" \t\r") == std::string::npos) return {};
  return line;
}

}  // namespace

std::vector<ConfidenceVector> read_confidences(std::istream& in, const std::string& source) {
  FrameRecords<ConfidenceVector> records(source);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = strip_comment(std::move(line));
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 4) records.fail(line_no, "expected '<frame>,<p1>,<p2>,<p3>'");

    std::int64_t frame = 0;
    if (!parse_index(fields[0], frame)) records.fail(line_no, "bad frame index");
    std::array<double, 3> p{};
    for (std::size_t i = 0; i < 3; ++i) {
      if (!parse_number(fields[i + 1], p[i])) {
        records.fail(line_no, "bad confidence p" + std::to_string(i + 1));
      }
    }
    try {
      records.add(line_no, frame, validate_confidence(p));
    } catch (const ValidationError& e) {
      records.fail(line_no, e.what());
    }
  }
  return std::move(records).finish();
}

void write_confidences(std::ostream& out, std::span<const ConfidenceVector> frames) {
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& p = frames[i].values();
    out << (i + 1) << ',' << p[0] << ',' << p[1] << ',' << p[2] << '\n';
  }
  out.precision(old);
}

std::vector<ConfidenceVector> tabulate(const FrameClassifier& classifier,
                                       std::int64_t video_length) {
  std::vector<ConfidenceVector> out;
  out.reserve(static_cast<std::size_t>(video_length));
  for (std::int64_t t = 1; t <= video_length; ++t) {
    out.push_back(classifier.classify(FrameIndex(t), video_length));
  }
  return out;
}

FileOracle::FileOracle(std::vector<ConfidenceVector> frames) : frames_(std::move(frames)) {
  if (frames_.empty()) throw ValidationError("file oracle needs at least one frame");
}

FileOracle FileOracle::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open confidence file " + path.string());
  return FileOracle(read_confidences(in, path.string()));
}

ConfidenceVector FileOracle::classify(FrameIndex t, std::int64_t video_length) const {
  check_probe(t, video_length, frames());
  return frames_[static_cast<std::size_t>(t.value - 1)];
}

FeatureTable::FeatureTable(std::vector<fusion::Vector> frames) : frames_(std::move(frames)) {
  if (frames_.empty() || frames_.front().empty()) {
    throw ValidationError("feature table needs at least one frame of dimension >= 1");
  }
  const std::size_t m = frames_.front().size();
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    if (frames_[i].size() != m) {
      throw ValidationError("feature of frame " + std::to_string(i + 1) + " has dimension " +
                            std::to_string(frames_[i].size()) + ", expected " +
                            std::to_string(m));
    }
    for (double v : frames_[i]) {
      if (!std::isfinite(v)) {
        throw ValidationError("feature of frame " + std::to_string(i + 1) + " is not finite");
      }
    }
  }
}

FeatureTable FeatureTable::read(std::istream& in, const std::string& source) {
  FrameRecords<fusion::Vector> records(source);
  std::optional<std::size_t> dim;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = strip_comment(std::move(line));
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tok;
    fields >> tok;
    std::int64_t frame = 0;
    if (!parse_index(tok, frame)) records.fail(line_no, "bad frame index '" + tok + "'");
    fusion::Vector f;
    while (fields >> tok) {
      double v = 0;
      if (!parse_number(tok, v) || !std::isfinite(v)) {
        records.fail(line_no, "bad feature value '" + tok + "'");
      }
      f.push_back(v);
    }
    if (f.empty()) records.fail(line_no, "frame has no feature values");
    if (!dim) dim = f.size();
    if (f.size() != *dim) {
      records.fail(line_no, "feature dimension " + std::to_string(f.size()) + ", expected " +
                                std::to_string(*dim));
    }
    records.add(line_no, frame, std::move(f));
  }
  return FeatureTable(std::move(records).finish());
}

FeatureTable FeatureTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open feature file " + path.string());
  return read(in, path.string());
}

void FeatureTable::write(std::ostream& out) const {
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    out << (i + 1);
    for (double v : frames_[i]) out << ' ' << v;
    out << '\n';
  }
  out.precision(old);
}

std::vector<fusion::Vector> FeatureTable::window(FrameIndex t, int radius) const {
  std::vector<fusion::Vector> out;
  out.reserve(static_cast<std::size_t>(2 * radius + 1));
  for (std::int64_t i = t.value - radius; i <= t.value + radius; ++i) {
    out.push_back(at(FrameIndex(std::clamp<std::int64_t>(i, 1, frames()))));
  }
  return out;
}

FusionOracle::FusionOracle(FeatureTable features, fusion::FusionWeights weights, int radius)
    : features_(std::move(features)), weights_(std::move(weights)), radius_(radius) {
  if (radius < 0 || weights_.radius() != radius) {
    throw ValidationError("fusion oracle radius N=" + std::to_string(radius) +
                          " does not match weights window of " +
                          std::to_string(weights_.window()) + " frames");
  }
  if (features_.dimension() != weights_.feature_dim()) {
    throw ValidationError("feature dimension " + std::to_string(features_.dimension()) +
                          " does not match weights dimension " +
                          std::to_string(weights_.feature_dim()));
  }
}

ConfidenceVector FusionOracle::classify(FrameIndex t, std::int64_t video_length) const {
  check_probe(t, video_length, features_.frames());
  return fusion::fuse_window(features_.window(t, radius_), weights_);
}

SingleFrameOracle::SingleFrameOracle(FeatureTable features, fusion::AffineLayer head)
    : features_(std::move(features)), head_(std::move(head)) {
  if (head_.in != features_.dimension() || head_.out != 3) {
    throw ValidationError("single-frame head shape does not match feature dimension " +
                          std::to_string(features_.dimension()));
  }
}

ConfidenceVector SingleFrameOracle::classify(FrameIndex t, std::int64_t video_length) const {
  check_probe(t, video_length, features_.frames());
  return fusion::linear_head(features_.at(t), head_);
}

}  // namespace ceg::sim
