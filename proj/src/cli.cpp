#include "tiertrack/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <set>

#include "tiertrack/config.hpp"
#include "tiertrack/error.hpp"
#include "tiertrack/evaluation.hpp"
#include "tiertrack/mot_io.hpp"
#include "tiertrack/synth.hpp"
#include "tiertrack/tracker.hpp"

namespace tiertrack {
namespace {

class InputError : public Error {
 public:
  using Error::Error;
};

template <typename Fn>
auto read_file(const std::string& path, Fn&& parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  try {
    return parse(in);
  } catch (const Error& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::vector<Detection> read_detections(const std::string& path, const std::string& format) {
  const bool jsonl = format == "jsonl" || (format.empty() && path.ends_with(".jsonl"));
  return read_file(path, [jsonl](std::istream& in) {
    return jsonl ? parse_jsonl_detections(in) : read_mot_detections(in);
  });
}

std::vector<GtBox> read_groundtruth(const std::string& path) {
  return read_file(path, [](std::istream& in) { return read_mot_groundtruth(in); });
}

std::vector<TrackRecord> read_results(const std::string& path) {
  return read_file(path, [](std::istream& in) { return read_mot_results(in); });
}

std::string format_rows(const std::vector<TrackRecord>& rows) {
  std::string out;
  for (const auto& r : rows) out += write_track_line(r) + "\n";
  return out;
}

nlohmann::json report_json(const std::optional<SequenceMetrics>& m,
                           const std::optional<ClassificationReport>& c) {
  nlohmann::json j;
  j["mota"] = m ? nlohmann::json(m->mota) : nlohmann::json(nullptr);
  j["idf1"] = m ? nlohmann::json(m->idf1) : nlohmann::json(nullptr);
  j["hota"] = m ? nlohmann::json(m->hota) : nlohmann::json(nullptr);
  j["fp"] = m ? nlohmann::json(m->fp) : nlohmann::json(nullptr);
  j["fn"] = m ? nlohmann::json(m->fn) : nlohmann::json(nullptr);
  j["ids"] = m ? nlohmann::json(m->id_switches) : nlohmann::json(nullptr);
  j["top1"] = c ? nlohmann::json(c->top1) : nlohmann::json(nullptr);
  j["top3"] = c ? nlohmann::json(c->top3) : nlohmann::json(nullptr);
  return j;
}

std::string metrics_table(const SequenceMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%-8s %-8s %-8s %8s %8s %8s %8s\n%-8.4f %-8.4f %-8.4f %8zu %8zu %8zu %8zu\n", "MOTA", "IDF1",
                "HOTA", "FP", "FN", "IDs", "GT", m.mota, m.idf1, m.hota, m.fp, m.fn, m.id_switches, m.gt_count);
  return buf;
}

std::string classification_table(const std::string& scheme, const ClassificationReport& c) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-10s %8s %8s %8s\n%-10s %8zu %8.4f %8.4f\n", "scheme", "items", "top1",
                "top3", scheme.c_str(), c.items, c.top1, c.top3);
  return buf;
}

ClassificationReport run_classification(const std::string& scheme, const std::vector<GtBox>& gt,
                                        const std::vector<TrackRecord>& tracks,
                                        const std::vector<Detection>& dets, double iou_thresh) {
  if (scheme == "image") return classify_images(gt, dets, iou_thresh);
  const VoteScheme vs = scheme == "majority" ? VoteScheme::MajorityVote : VoteScheme::LogitSum;
  return classify_tracks(gt, tracks, dets, vs, iou_thresh);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Iterative confidence-tier multi-object tracker", "tiertrack"};
  app.require_subcommand(1);

  std::string dets_path, config_path, out_path, format;
  auto* track = app.add_subcommand("track", "Track detections into a MOT result file");
  track->add_option("--dets", dets_path, "Detections (MOT text or JSONL)")->required();
  track->add_option("--config", config_path, "Tracker configuration")->required();
  track->add_option("--out", out_path, "Output MOT result file")->required();
  track->add_option("--format", format, "Detection file format")->check(CLI::IsMember({"mot", "jsonl"}));

  std::string gt_path, pred_path, json_path, scheme = "logitsum";
  double iou_thresh = 0.5;
  auto* eval = app.add_subcommand("eval", "Score a result file against ground truth");
  eval->add_option("--gt", gt_path, "Ground-truth MOT file")->required();
  eval->add_option("--pred", pred_path, "Result MOT file")->required();
  eval->add_option("--iou-thresh", iou_thresh, "Match IoU threshold")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--json", json_path, "Write the report as JSON");
  eval->add_option("--dets", dets_path, "JSONL detections with logits, adds top-1/top-3");
  eval->add_option("--scheme", scheme, "Classification scheme with --dets")
      ->check(CLI::IsMember({"majority", "logitsum", "image"}));

  std::string tracks_path;
  auto* infer = app.add_subcommand("infer", "Species accuracy from per-detection logits");
  infer->add_option("--tracks", tracks_path, "Result MOT file")->required();
  infer->add_option("--dets", dets_path, "JSONL detections with logits")->required();
  infer->add_option("--gt", gt_path, "Ground-truth MOT file with class ids")->required();
  infer->add_option("--scheme", scheme, "majority, logitsum or image")
      ->required()
      ->check(CLI::IsMember({"majority", "logitsum", "image"}));
  infer->add_option("--iou-thresh", iou_thresh, "Match IoU threshold")->check(CLI::Range(0.0, 1.0));
  infer->add_option("--json", json_path, "Write the report as JSON");

  std::string out_dir;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence");
  synth->add_option("--config", config_path, "Synthetic sequence configuration")->required();
  synth->add_option("--out-dir", out_dir, "Directory for gt.txt and dets.jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return kExitUsage;
  }

  try {
    if (*track) {
      TrackerConfig cfg;
      try {
        cfg = load_tracker_config(config_path);
      } catch (const ConfigInvalid& e) {
        throw InputError(config_path + ": " + e.what());
      }
      const auto dets = read_detections(dets_path, format);
      const auto start = std::chrono::steady_clock::now();
      const auto rows = track_sequence(dets, cfg);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      write_file_atomic(out_path, format_rows(rows));
      int frames = 0;
      for (const auto& d : dets) frames = std::max(frames, d.frame);
      err << "tracked " << frames << " frames, " << rows.size() << " rows";
      if (seconds > 0.0) err << ", " << static_cast<long long>(frames / seconds) << " frames/s";
      err << "\n";
    } else if (*eval) {
      const auto gt = read_groundtruth(gt_path);
      const auto pred = read_results(pred_path);
      const SequenceMetrics m = evaluate_sequence(gt, pred, iou_thresh);
      std::optional<ClassificationReport> cls;
      out << metrics_table(m);
      if (!dets_path.empty()) {
        cls = run_classification(scheme, gt, pred, read_detections(dets_path, "jsonl"), iou_thresh);
        out << classification_table(scheme, *cls);
      }
      if (!json_path.empty()) write_json(json_path, report_json(m, cls));
    } else if (*infer) {
      const auto gt = read_groundtruth(gt_path);
      const auto tracks = read_results(tracks_path);
      const auto dets = read_detections(dets_path, "jsonl");
      const ClassificationReport c = run_classification(scheme, gt, tracks, dets, iou_thresh);
      out << classification_table(scheme, c);
      if (!json_path.empty()) {
        auto j = report_json(std::nullopt, c);
        j["scheme"] = scheme;
        j["items"] = c.items;
        write_json(json_path, j);
      }
    } else if (*synth) {
      SynthConfig cfg;
      try {
        cfg = load_synth_config(config_path);
      } catch (const ConfigInvalid& e) {
        throw InputError(config_path + ": " + e.what());
      }
      write_synthetic_sequence(generate_synthetic_sequence(cfg), out_dir);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitOk;
}

}  // namespace tiertrack
