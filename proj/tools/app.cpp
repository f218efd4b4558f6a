#include "app.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ceg/eval.hpp"
#include "ceg/fusion.hpp"
#include "ceg/oracle_sim.hpp"
#include "ceg/search.hpp"

namespace ceg::cli {

using json = nlohmann::ordered_json;

namespace {

struct VideoOptions {
  std::int64_t frames = 10000;
  std::vector<double> proportions{sim::kDatasetProportions.begin(),
                                  sim::kDatasetProportions.end()};
  double jitter = 0.1;
  std::uint64_t seed = 0;
  std::string layout_path;
};

struct OracleOptions {
  std::string kind = "perfect";
  std::optional<double> confidence;
  std::string confidence_model = "fixed";
  double concentration = 20.0;
  std::string matrix = "resnet-tfe";
  std::string matrix_file;
  std::string confidences_path;
  std::string features_path;
  std::string weights_path;
  int radius = 6;
  bool single_frame = false;
};

struct ReportOptions {
  std::string report_path;
  bool json_stdout = false;
};

void add_video_options(CLI::App& cmd, VideoOptions& v) {
  cmd.add_option("--frames,-T", v.frames, "Number of frames in the synthetic video")
      ->capture_default_str();
  cmd.add_option("--proportions", v.proportions,
                 "Shares of esophagus/stomach, small intestine, colorectum")
      ->delimiter(',')
      ->expected(3)
      ->capture_default_str();
  cmd.add_option("--jitter", v.jitter, "Relative jitter of the region shares")
      ->capture_default_str();
  cmd.add_option("--seed", v.seed, "Seed for layout jitter and oracle noise")->capture_default_str();
  cmd.add_option("--layout", v.layout_path, "Ground-truth layout file 'T t_s t_e'");
}

void add_oracle_options(CLI::App& cmd, OracleOptions& o, bool file_backed) {
  std::vector<std::string> kinds{"perfect", "noisy"};
  if (file_backed) {
    kinds.push_back("file");
    kinds.push_back("fusion");
  }
  cmd.add_option("--oracle", o.kind, "Frame classifier")
      ->check(CLI::IsMember(kinds))
      ->capture_default_str();
  cmd.add_option("--confidence", o.confidence,
                 "Confidence of the emitted class (default 1.0 perfect, 0.9 noisy)");
  cmd.add_option("--confidence-model", o.confidence_model, "Noisy-oracle confidence model")
      ->check(CLI::IsMember({"fixed", "beta"}))
      ->capture_default_str();
  cmd.add_option("--concentration", o.concentration, "Beta concentration")->capture_default_str();
  cmd.add_option("--matrix", o.matrix, "Confusion-matrix preset")
      ->check(CLI::IsMember({"resnet", "resnet-tfe", "custom"}))
      ->capture_default_str();
  cmd.add_option("--matrix-file", o.matrix_file, "3x3 matrix file for --matrix custom");
  if (file_backed) {
    cmd.add_option("--confidences", o.confidences_path, "Per-frame confidence CSV (--oracle file)");
    cmd.add_option("--features", o.features_path, "Per-frame feature file (--oracle fusion)");
    cmd.add_option("--weights", o.weights_path, "Fusion weights file (--oracle fusion)");
    cmd.add_option("--radius,-N", o.radius, "Context half-width N")->capture_default_str();
    cmd.add_flag("--single-frame", o.single_frame, "Use the single-frame linear head");
  }
}

void add_search_options(CLI::App& cmd, search::SearchConfig& s) {
  cmd.add_option("--alpha", s.alpha, "Interval decay factor (0.5, 1)")->capture_default_str();
  cmd.add_option("--theta", s.theta, "Confidence threshold")->capture_default_str();
  cmd.add_option("--epsilon", s.epsilon, "Minimum stride factor")->capture_default_str();
  cmd.add_option("--initial-fraction", s.initial_fraction, "Start position as a fraction of T")
      ->capture_default_str();
  cmd.add_flag("--stride-alpha", s.stride_alpha, "Also scale each stride by alpha");
}

void add_report_options(CLI::App& cmd, ReportOptions& r) {
  cmd.add_option("--report", r.report_path, "Write the machine-readable JSON report here");
  cmd.add_flag("--json", r.json_stdout, "Print the JSON report instead of key=value text");
}

std::array<double, 3> proportions_of(const VideoOptions& v) {
  return {v.proportions.at(0), v.proportions.at(1), v.proportions.at(2)};
}

ConfusionMatrix matrix_of(const OracleOptions& o) {
  if (o.matrix == "resnet") return ConfusionMatrix::resnet();
  if (o.matrix == "custom") {
    if (o.matrix_file.empty()) throw ValidationError("--matrix custom needs --matrix-file");
    return ConfusionMatrix::load(o.matrix_file);
  }
  return ConfusionMatrix::resnet_tfe();
}

sim::NoisyOracleConfig noisy_config(const OracleOptions& o, std::uint64_t seed) {
  sim::NoisyOracleConfig cfg;
  cfg.matrix = matrix_of(o);
  cfg.confidence.kind = o.confidence_model == "beta" ? sim::ConfidenceModel::Kind::Beta
                                                     : sim::ConfidenceModel::Kind::Fixed;
  cfg.confidence.mean = o.confidence.value_or(0.9);
  cfg.confidence.concentration = o.concentration;
  cfg.seed = seed;
  return cfg;
}

/// Classifier plus what is known about the video it covers.
struct Setup {
  std::unique_ptr<FrameClassifier> classifier;
  std::int64_t frames = 0;
  std::optional<sim::VideoLayout> truth;
};

std::unique_ptr<FrameClassifier> synthetic_oracle(const OracleOptions& o,
                                                  const sim::VideoLayout& layout,
                                                  std::uint64_t seed) {
  if (o.kind == "perfect") {
    return std::make_unique<sim::PerfectOracle>(layout, o.confidence.value_or(1.0));
  }
  return std::make_unique<sim::NoisyOracle>(layout, noisy_config(o, seed));
}

Setup make_setup(const VideoOptions& v, const OracleOptions& o) {
  Setup s;
  if (!v.layout_path.empty()) s.truth = sim::load_layout(v.layout_path);

  if (o.kind == "file") {
    if (o.confidences_path.empty()) throw ValidationError("--oracle file needs --confidences");
    auto oracle = std::make_unique<sim::FileOracle>(sim::FileOracle::load(o.confidences_path));
    s.frames = oracle->frames();
    s.classifier = std::move(oracle);
  } else if (o.kind == "fusion") {
    if (o.features_path.empty() || o.weights_path.empty()) {
      throw ValidationError("--oracle fusion needs --features and --weights");
    }
    auto features = sim::FeatureTable::load(o.features_path);
    auto weights = fusion::FusionWeights::load(o.weights_path);
    s.frames = features.frames();
    if (o.single_frame) {
      if (!weights.single_frame_head()) {
        throw ValidationError("weights file has no linear.weight/linear.bias for --single-frame");
      }
      s.classifier = std::make_unique<sim::SingleFrameOracle>(std::move(features),
                                                              *weights.single_frame_head());
    } else {
      s.classifier =
          std::make_unique<sim::FusionOracle>(std::move(features), std::move(weights), o.radius);
    }
  } else {
    if (!s.truth) s.truth = sim::generate_layout(v.frames, proportions_of(v), v.jitter, v.seed);
    s.frames = s.truth->frames;
    s.classifier = synthetic_oracle(o, *s.truth, v.seed);
  }

  if (s.truth && s.truth->frames != s.frames) {
    throw ValidationError("layout has " + std::to_string(s.truth->frames) +
                          " frames but the classifier covers " + std::to_string(s.frames));
  }
  return s;
}

json video_json(const VideoOptions& v) {
  json j;
  j["frames"] = v.frames;
  j["proportions"] = v.proportions;
  j["jitter"] = v.jitter;
  j["seed"] = v.seed;
  j["layout"] = v.layout_path;
  return j;
}

json oracle_json(const OracleOptions& o) {
  json j;
  j["kind"] = o.kind;
  if (o.kind == "perfect") j["confidence"] = o.confidence.value_or(1.0);
  if (o.kind == "noisy") {
    j["confidence"] = o.confidence.value_or(0.9);
    j["confidence_model"] = o.confidence_model;
    if (o.confidence_model == "beta") j["concentration"] = o.concentration;
    j["matrix"] = o.matrix;
    if (o.matrix == "custom") j["matrix_file"] = o.matrix_file;
  }
  if (o.kind == "file") j["confidences"] = o.confidences_path;
  if (o.kind == "fusion") {
    j["features"] = o.features_path;
    j["weights"] = o.weights_path;
    j["radius"] = o.radius;
    j["single_frame"] = o.single_frame;
  }
  return j;
}

json search_json(const search::SearchConfig& s) {
  json j;
  j["alpha"] = s.alpha;
  j["theta"] = s.theta;
  j["epsilon"] = s.epsilon;
  j["initial_fraction"] = s.initial_fraction;
  j["stride_alpha"] = s.stride_alpha;
  return j;
}

json segment_json(const Segment& s) { return json::array({s.start.value, s.end.value}); }

json trace_json(const search::SearchTrace& trace) {
  json probes = json::array();
  for (const auto& p : trace.probes) {
    probes.push_back({{"iteration", p.iteration},
                      {"t", p.position.value},
                      {"d", p.interval},
                      {"class", label(p.predicted)},
                      {"confidence", p.confidence},
                      {"stride", p.stride}});
  }
  return json{{"result", trace.result.value}, {"oracle_calls", trace.oracle_calls},
              {"probes", std::move(probes)}};
}

json summary_json(const eval::DeviationSummary& s) {
  return json{{"count", s.count},
              {"mean", s.mean},
              {"median", s.median},
              {"lower_quartile", s.lower_quartile},
              {"upper_quartile", s.upper_quartile},
              {"whisker_low", s.whisker_low},
              {"whisker_high", s.whisker_high}};
}

json grounding_result_json(const eval::GroundingResult& r) {
  return json{{"iou", r.iou}, {"start_error", r.start_error}, {"end_error", r.end_error}};
}

// key=value lines for every scalar leaf; arrays of scalars are joined with
// commas, nested arrays give one line per row, arrays of objects are
// reported by length only.
void write_text(std::ostream& out, const json& j, const std::string& prefix) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const json& v = it.value();
    if (v.is_object()) {
      write_text(out, v, key);
    } else if (v.is_array()) {
      if (!v.empty() && v.front().is_array()) {
        json rows = json::object();
        for (std::size_t i = 0; i < v.size(); ++i) rows[std::to_string(i + 1)] = v[i];
        write_text(out, rows, key);
        continue;
      }
      if (!v.empty() && v.front().is_structured()) {
        out << key << ".count=" << v.size() << '\n';
        continue;
      }
      out << key << '=';
      for (std::size_t i = 0; i < v.size(); ++i) {
        out << (i ? "," : "") << (v[i].is_string() ? v[i].get<std::string>() : v[i].dump());
      }
      out << '\n';
    } else {
      out << key << '=' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
    }
  }
}

void emit(const json& report, const ReportOptions& r, std::ostream& out) {
  if (!r.report_path.empty()) {
    std::ofstream f(r.report_path);
    if (!f) throw FormatError("cannot write report " + r.report_path);
    f << report.dump(2) << '\n';
  }
  if (r.json_stdout) {
    out << report.dump(2) << '\n';
  } else {
    write_text(out, report, "");
  }
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
  VideoOptions video;
  OracleOptions oracle;
  ReportOptions report;
  std::string layout_out;
  std::string confidences_out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const auto layout =
      sim::generate_layout(a.video.frames, proportions_of(a.video), a.video.jitter, a.video.seed);
  if (!a.layout_out.empty()) sim::save_layout(a.layout_out, layout);

  json report;
  report["command"] = "generate";
  report["config"] = {{"video", video_json(a.video)}};
  if (!a.confidences_out.empty()) {
    report["config"]["oracle"] = oracle_json(a.oracle);
    const auto oracle = synthetic_oracle(a.oracle, layout, a.video.seed);
    const auto frames = sim::tabulate(*oracle, layout.frames);
    std::ofstream f(a.confidences_out);
    if (!f) throw FormatError("cannot write " + a.confidences_out);
    sim::write_confidences(f, frames);
  }
  report["result"] = {{"layout", {layout.frames, layout.start, layout.end}},
                      {"layout_file", a.layout_out},
                      {"confidences_file", a.confidences_out}};
  emit(report, a.report, out);
  return 0;
}

// ---- search -----------------------------------------------------------------

struct SearchArgs {
  VideoOptions video;
  OracleOptions oracle;
  search::SearchConfig search;
  ReportOptions report;
};

int cmd_search(const SearchArgs& a, std::ostream& out) {
  a.search.validate();
  const Setup s = make_setup(a.video, a.oracle);
  const auto g = search::ground_small_intestine(*s.classifier, s.frames, a.search);

  json result;
  result["segment"] = segment_json(g.segment);
  result["oracle_calls"] = g.oracle_calls();
  result["flagged"] = g.flagged();
  result["swapped"] = g.swapped;
  result["small_intestine_seen"] = g.small_intestine_seen;
  if (s.truth) {
    result["truth"] = segment_json(s.truth->small_intestine());
    result["evaluation"] = grounding_result_json(
        eval::evaluate_grounding(g.segment, s.truth->small_intestine(), g.oracle_calls()));
  }
  result["start_search"] = trace_json(g.start_trace);
  result["end_search"] = trace_json(g.end_trace);

  json report;
  report["command"] = "search";
  report["config"] = {{"video", video_json(a.video)},
                      {"frames", s.frames},
                      {"oracle", oracle_json(a.oracle)},
                      {"search", search_json(a.search)}};
  report["result"] = std::move(result);
  emit(report, a.report, out);
  return g.flagged() ? kExitFlagged : 0;
}

// ---- scan -------------------------------------------------------------------

int cmd_scan(const SearchArgs& a, std::ostream& out) {
  a.search.validate();
  const Setup s = make_setup(a.video, a.oracle);
  const auto scan = search::scan_baseline(*s.classifier, s.frames);
  const auto g = search::ground_small_intestine(*s.classifier, s.frames, a.search);

  json result;
  result["scan"]["found"] = scan.segment.has_value();
  if (scan.segment) result["scan"]["segment"] = segment_json(*scan.segment);
  result["scan"]["oracle_calls"] = scan.oracle_calls;
  result["search"]["segment"] = segment_json(g.segment);
  result["search"]["oracle_calls"] = g.oracle_calls();
  result["search"]["flagged"] = g.flagged();
  result["call_ratio"] =
      static_cast<double>(g.oracle_calls()) / static_cast<double>(scan.oracle_calls);
  if (s.truth) {
    const Segment truth = s.truth->small_intestine();
    result["truth"] = segment_json(truth);
    if (scan.segment) {
      result["scan"]["evaluation"] =
          grounding_result_json(eval::evaluate_grounding(*scan.segment, truth, scan.oracle_calls));
    }
    result["search"]["evaluation"] =
        grounding_result_json(eval::evaluate_grounding(g.segment, truth, g.oracle_calls()));
  }
  if (scan.segment) result["search_vs_scan_iou"] = eval::segment_iou(g.segment, *scan.segment);

  json report;
  report["command"] = "scan";
  report["config"] = {{"video", video_json(a.video)},
                      {"frames", s.frames},
                      {"oracle", oracle_json(a.oracle)},
                      {"search", search_json(a.search)}};
  report["result"] = std::move(result);
  emit(report, a.report, out);
  return scan.segment ? 0 : kExitFlagged;
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  VideoOptions video;
  OracleOptions oracle;
  search::SearchConfig search;
  ReportOptions report;
  int trials = 200;
  unsigned threads = 0;
  bool compare_scan = false;
};

struct TrialOutcome {
  eval::GroundingResult search;
  bool flagged = false;
  std::optional<double> scan_iou;
};

TrialOutcome run_trial(const SimulateArgs& a, std::uint64_t seed) {
  const auto layout =
      sim::generate_layout(a.video.frames, proportions_of(a.video), a.video.jitter, seed);
  const auto oracle = synthetic_oracle(a.oracle, layout, seed);
  const auto g = search::ground_small_intestine(*oracle, layout.frames, a.search);
  TrialOutcome t{eval::evaluate_grounding(g.segment, layout.small_intestine(), g.oracle_calls()),
                 g.flagged(), std::nullopt};
  if (a.compare_scan) {
    const auto scan = search::scan_baseline(*oracle, layout.frames);
    t.scan_iou = scan.segment ? eval::segment_iou(*scan.segment, layout.small_intestine()) : 0.0;
  }
  return t;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.trials < 1) throw ValidationError("--trials must be at least 1");
  if (!a.video.layout_path.empty()) {
    throw ValidationError("simulate generates its own layouts; --layout is not accepted");
  }
  a.search.validate();

  // Trial i uses seed + i, so results do not depend on scheduling.
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(a.trials));
  const unsigned workers = std::max(
      1u, std::min<unsigned>(a.threads ? a.threads : std::thread::hardware_concurrency(),
                             static_cast<unsigned>(a.trials)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < outcomes.size(); i = next++) {
          try {
            outcomes[i] = run_trial(a, a.video.seed + i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> ious, start_err, end_err, scan_ious;
  double calls = 0.0;
  int flagged = 0;
  json per_trial = json::array();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    ious.push_back(o.search.iou);
    start_err.push_back(static_cast<double>(o.search.start_error));
    end_err.push_back(static_cast<double>(o.search.end_error));
    calls += static_cast<double>(o.search.oracle_calls);
    flagged += o.flagged ? 1 : 0;
    json row{{"seed", a.video.seed + i},
             {"segment", segment_json(o.search.predicted)},
             {"truth", segment_json(o.search.truth)},
             {"iou", o.search.iou},
             {"start_error", o.search.start_error},
             {"end_error", o.search.end_error},
             {"oracle_calls", o.search.oracle_calls},
             {"flagged", o.flagged}};
    if (o.scan_iou) {
      scan_ious.push_back(*o.scan_iou);
      row["scan_iou"] = *o.scan_iou;
    }
    per_trial.push_back(std::move(row));
  }

  const auto n = static_cast<double>(ious.size());
  const auto iou_summary = eval::deviation_summary(ious);
  double var = 0.0;
  for (double v : ious) var += (v - iou_summary.mean) * (v - iou_summary.mean);
  const double sd = ious.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;

  json result;
  result["trials"] = a.trials;
  result["iou"] = {{"mean", iou_summary.mean},
                   {"sd", sd},
                   {"ci95_low", iou_summary.mean - 1.96 * sd / std::sqrt(n)},
                   {"ci95_high", iou_summary.mean + 1.96 * sd / std::sqrt(n)},
                   {"median", iou_summary.median},
                   {"lower_quartile", iou_summary.lower_quartile},
                   {"upper_quartile", iou_summary.upper_quartile}};
  result["start_deviation"] = summary_json(eval::deviation_summary(start_err));
  result["end_deviation"] = summary_json(eval::deviation_summary(end_err));
  result["mean_oracle_calls"] = calls / n;
  result["flagged"] = flagged;
  if (!scan_ious.empty()) {
    result["scan_mean_iou"] = eval::deviation_summary(scan_ious).mean;
  }
  result["per_trial"] = std::move(per_trial);

  json report;
  report["command"] = "simulate";
  report["config"] = {{"video", video_json(a.video)},
                      {"oracle", oracle_json(a.oracle)},
                      {"search", search_json(a.search)},
                      {"trials", a.trials},
                      {"compare_scan", a.compare_scan}};
  report["result"] = std::move(result);
  emit(report, a.report, out);
  return 0;
}

// ---- fuse -------------------------------------------------------------------

struct FuseArgs {
  OracleOptions oracle;
  ReportOptions report;
  std::string out_path;
};

int cmd_fuse(FuseArgs a, std::ostream& out) {
  a.oracle.kind = "fusion";
  if (a.out_path.empty()) throw ValidationError("fuse needs --out");
  const Setup s = make_setup(VideoOptions{}, a.oracle);
  const auto frames = sim::tabulate(*s.classifier, s.frames);
  {
    std::ofstream f(a.out_path);
    if (!f) throw FormatError("cannot write " + a.out_path);
    sim::write_confidences(f, frames);
  }
  std::array<std::int64_t, 3> counts{};
  for (const auto& p : frames) ++counts[slot(argmax_class(p))];

  json report;
  report["command"] = "fuse";
  report["config"] = {{"oracle", oracle_json(a.oracle)}, {"out", a.out_path}};
  report["result"] = {{"frames", s.frames}, {"predicted_counts", counts}};
  emit(report, a.report, out);
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string layout_path;
  std::string confidences_path;
  std::vector<std::int64_t> predicted;
  ReportOptions report;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto layout = sim::load_layout(a.layout_path);
  json result;
  json config{{"layout", a.layout_path}};

  if (!a.confidences_path.empty()) {
    config["confidences"] = a.confidences_path;
    const auto oracle = sim::FileOracle::load(a.confidences_path);
    if (oracle.frames() != layout.frames) {
      throw ValidationError("confidence file covers " + std::to_string(oracle.frames()) +
                            " frames, layout has " + std::to_string(layout.frames));
    }
    std::vector<eval::Prediction> preds;
    double loss = 0.0;
    for (std::int64_t t = 1; t <= layout.frames; ++t) {
      const auto p = oracle.classify(FrameIndex(t), layout.frames);
      const GiClass truth = layout.class_at(FrameIndex(t));
      preds.push_back({argmax_class(p), truth});
      loss += fusion::cross_entropy(p, truth);
    }
    const auto tallies = eval::tally(preds);
    const auto acc = eval::micro_macro_accuracy(tallies);
    const auto cm = eval::confusion_estimate(preds);
    json matrix = json::array();
    for (const auto& row : cm.entries()) matrix.push_back(row);
    result["accuracy_micro"] = acc.micro;
    result["accuracy_macro"] = acc.macro;
    result["mean_cross_entropy"] = loss / static_cast<double>(layout.frames);
    result["confusion_matrix"] = matrix;
  }
  if (!a.predicted.empty()) {
    const Segment pred = Segment::checked(a.predicted.at(0), a.predicted.at(1), layout.frames);
    config["predicted"] = segment_json(pred);
    result["grounding"] =
        grounding_result_json(eval::evaluate_grounding(pred, layout.small_intestine(), 0));
  }
  if (result.empty()) throw ValidationError("eval needs --confidences and/or --predicted");

  json report;
  report["command"] = "eval";
  report["config"] = std::move(config);
  report["result"] = std::move(result);
  emit(report, a.report, out);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Small-intestine grounding in capsule endoscopy videos"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic layout (and confidences)");
  add_video_options(*generate, gen.video);
  add_oracle_options(*generate, gen.oracle, false);
  add_report_options(*generate, gen.report);
  generate->add_option("--layout-out", gen.layout_out, "Layout file to write");
  generate->add_option("--confidences-out", gen.confidences_out,
                       "Per-frame confidence CSV to write");

  SearchArgs srch;
  auto* search_cmd = app.add_subcommand("search", "Ground the small intestine by boundary search");
  add_video_options(*search_cmd, srch.video);
  add_oracle_options(*search_cmd, srch.oracle, true);
  add_search_options(*search_cmd, srch.search);
  add_report_options(*search_cmd, srch.report);

  SearchArgs scn;
  auto* scan_cmd = app.add_subcommand("scan", "Classify every frame (baseline) and compare");
  add_video_options(*scan_cmd, scn.video);
  add_oracle_options(*scan_cmd, scn.oracle, true);
  add_search_options(*scan_cmd, scn.search);
  add_report_options(*scan_cmd, scn.report);

  SimulateArgs simu;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo grounding over synthetic videos");
  add_video_options(*simulate, simu.video);
  add_oracle_options(*simulate, simu.oracle, false);
  add_search_options(*simulate, simu.search);
  add_report_options(*simulate, simu.report);
  simulate->add_option("--trials", simu.trials, "Number of videos")->capture_default_str();
  simulate->add_option("--threads", simu.threads, "Worker threads (0 = hardware)");
  simulate->add_flag("--compare-scan", simu.compare_scan, "Also run the exhaustive scan");

  FuseArgs fz;
  auto* fuse = app.add_subcommand("fuse", "Confidence file from features and fusion weights");
  fuse->add_option("--features", fz.oracle.features_path, "Per-frame feature file")->required();
  fuse->add_option("--weights", fz.oracle.weights_path, "Fusion weights file")->required();
  fuse->add_option("--radius,-N", fz.oracle.radius, "Context half-width N")->capture_default_str();
  fuse->add_flag("--single-frame", fz.oracle.single_frame, "Use the single-frame linear head");
  fuse->add_option("--out", fz.out_path, "Confidence CSV to write")->required();
  add_report_options(*fuse, fz.report);

  EvalArgs ev;
  auto* evaluate = app.add_subcommand("eval", "Accuracy, confusion and IoU against a layout");
  evaluate->add_option("--layout", ev.layout_path, "Ground-truth layout file")->required();
  evaluate->add_option("--confidences", ev.confidences_path, "Per-frame confidence CSV");
  evaluate->add_option("--predicted", ev.predicted, "Predicted segment 'start,end'")
      ->delimiter(',')
      ->expected(2);
  add_report_options(*evaluate, ev.report);

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("ceg");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*generate) return cmd_generate(gen, out);
    if (*search_cmd) return cmd_search(srch, out);
    if (*scan_cmd) return cmd_scan(scn, out);
    if (*simulate) return cmd_simulate(simu, out);
    if (*fuse) return cmd_fuse(fz, out);
    if (*evaluate) return cmd_eval(ev, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace ceg::cli
