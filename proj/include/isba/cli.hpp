#pragma once

// Command-line front end: synth | train | align | segment | eval.
// Exit codes: 0 success, 1 runtime failure, 2 bad usage.

#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "isba/config.hpp"
#include "isba/error.hpp"
#include "isba/io.hpp"
#include "isba/pipeline.hpp"
#include "isba/run_dir.hpp"
#include "isba/synthetic.hpp"

namespace isba::cli {

namespace detail {

// Flag spellings accept both snake_case and kebab-case.
inline std::string flag_names(const std::string& key) {
  std::string kebab = key;
  for (char& ch : kebab) {
    if (ch == '_') ch = '-';
  }
  return kebab == key ? "--" + key : "--" + key + ",--" + kebab;
}

// Config keys exposed as flags on one subcommand; collected as overrides after parsing.
class ConfigFlags {
 public:
  ConfigFlags(CLI::App* app, const std::vector<std::string>& keys) {
    values_.reserve(keys.size());
    for (const auto& key : keys) {
      values_.push_back({key, std::string{}, nullptr});
      auto& slot = values_.back();
      slot.option = app->add_option(flag_names(key), slot.value, "override '" + key + "'");
    }
    app->add_option("--config", file_, "JSON configuration file")->check(CLI::ExistingFile);
  }

  RunConfig resolve() const {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& slot : values_) {
      if (slot.option->count() > 0) overrides.emplace_back(slot.key, slot.value);
    }
    std::optional<std::filesystem::path> file;
    if (!file_.empty()) file = file_;
    return config_resolve(file, overrides);
  }

 private:
  struct Slot {
    std::string key;
    std::string value;
    CLI::Option* option;
  };
  std::vector<Slot> values_;
  std::string file_;
};

inline std::vector<std::string> train_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : isba::detail::config_fields()) keys.push_back(key);
  return keys;
}

inline const std::vector<std::string> kAlignKeys = {"rho", "theta", "seed", "align_iters", "precision", "jobs"};
inline const std::vector<std::string> kSegmentKeys = {"precision", "jobs"};

template <class S>
std::vector<LabelSequence> predict(const std::string& model_path, const Dataset& data, const RunConfig& c,
                                   bool aligning) {
  const auto model = load_model_for<S>(model_path, data);
  return aligning ? align_all(model, data, c.refinement, c.jobs) : segment_all(model, data, c.jobs);
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Weakly supervised action segmentation and alignment with soft boundary assignment", "isba"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  SyntheticSpec spec;
  std::size_t test_videos = 0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  spec.num_videos = 20;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--videos", spec.num_videos, "training videos")->capture_default_str();
  synth->add_option("--test-videos,--test_videos", test_videos, "held-out videos (manifest_test.json)")
      ->capture_default_str();
  synth->add_option("--classes", spec.num_classes, "label count k, background included")->capture_default_str();
  synth->add_flag("--background", spec.background, "reserve label 0 as background (SIL)");
  synth->add_option("--seed", synth_seed, "random seed")->capture_default_str();
  synth->add_option("--frames-min,--frames_min", spec.min_frames)->capture_default_str();
  synth->add_option("--frames-max,--frames_max", spec.max_frames)->capture_default_str();
  synth->add_option("--dim", spec.dim, "feature dimension")->capture_default_str();
  synth->add_option("--separation", spec.mean_separation, "distance between class means")->capture_default_str();
  synth->add_option("--segs-min,--segs_min", spec.min_segments)->capture_default_str();
  synth->add_option("--segs-max,--segs_max", spec.max_segments)->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train fully (ground truth) or weakly (transcripts)");
  detail::ConfigFlags train_flags(train, detail::train_keys());

  // align / segment
  std::string model_path, data_path, pred_out;
  auto* align_cmd = app.add_subcommand("align", "Align each video's transcript to its frames");
  align_cmd->add_option("--model", model_path, "checkpoint or weak run directory")->required();
  align_cmd->add_option("--data", data_path, "dataset manifest")->required();
  align_cmd->add_option("--out", pred_out, "directory for <id>.txt label files")->required();
  detail::ConfigFlags align_flags(align_cmd, detail::kAlignKeys);

  auto* segment_cmd = app.add_subcommand("segment", "Label every frame of each video");
  segment_cmd->add_option("--model", model_path, "checkpoint or weak run directory")->required();
  segment_cmd->add_option("--data", data_path, "dataset manifest")->required();
  segment_cmd->add_option("--out", pred_out, "directory for <id>.txt label files")->required();
  detail::ConfigFlags segment_flags(segment_cmd, detail::kSegmentKeys);

  // eval
  std::string pred_dir, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Score predicted label files against ground truth");
  eval_cmd->add_option("--pred", pred_dir, "directory of <id>.txt label files")->required();
  eval_cmd->add_option("--data", data_path, "dataset manifest with ground truth")->required();
  eval_cmd->add_option("--out", eval_out, "directory for metrics.json (default: --pred)");

  auto usage_error = [&](const std::string& message, const CLI::App* where) {
    err << "error: " << message << "\n\n" << where->help();
    return 2;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    CLI::App* target = &app;
    for (auto* sub : app.get_subcommands()) target = sub;
    out << target->help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    const CLI::App* where = &app;
    for (auto* sub : app.get_subcommands()) where = sub;
    return usage_error(e.what(), where);
  }

  const CLI::App* active = app.get_subcommands().front();
  try {
    if (synth->parsed()) {
      SyntheticSpec all = spec;
      all.num_videos = spec.num_videos + test_videos;
      Dataset data = generate_synthetic(all, synth_seed);
      Dataset test{data.vocab, {}};
      for (std::size_t v = spec.num_videos; v < data.videos.size(); ++v) {
        test.videos.push_back(std::move(data.videos[v]));
      }
      data.videos.resize(spec.num_videos);
      write_dataset(synth_out, data, "manifest.json");
      nlohmann::json summary{{"out", synth_out},
                             {"manifest", (std::filesystem::path(synth_out) / "manifest.json").string()},
                             {"videos", data.videos.size()},
                             {"classes", data.num_classes()},
                             {"background", data.vocab.background().has_value()}};
      if (test_videos > 0) {
        write_dataset(synth_out, test, "manifest_test.json");
        summary["test_manifest"] = (std::filesystem::path(synth_out) / "manifest_test.json").string();
        summary["test_videos"] = test.videos.size();
      }
      out << summary.dump() << "\n";
      return 0;
    }

    if (train->parsed()) {
      RunConfig c = train_flags.resolve();
      if (c.data.empty()) return usage_error("train needs --data (or 'data' in --config)", train);
      if (c.out.empty()) return usage_error("train needs --out (or 'out' in --config)", train);
      out << run_training(c).dump() << "\n";
      return 0;
    }

    if (align_cmd->parsed() || segment_cmd->parsed()) {
      const bool aligning = align_cmd->parsed();
      const RunConfig c = (aligning ? align_flags : segment_flags).resolve();
      const Dataset data = load_dataset(data_path);
      const auto preds = c.train.precision == Precision::f32 ? detail::predict<float>(model_path, data, c, aligning)
                                                             : detail::predict<double>(model_path, data, c, aligning);
      write_predictions(pred_out, data, preds);
      out << nlohmann::json{{"out", pred_out}, {"videos", preds.size()}}.dump() << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      const Dataset data = load_dataset(data_path);
      const MetricReport report = evaluate(data, load_predictions(pred_dir, data));
      const std::filesystem::path dir = eval_out.empty() ? pred_dir : eval_out;
      write_metrics(dir / "metrics.json", report);
      out << to_json(report).dump() << "\n";
      return 0;
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) return usage_error(e.what(), active);
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace isba::cli
