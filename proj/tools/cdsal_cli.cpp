#include <filesystem>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdsal/centerbias.hpp"
#include "cdsal/ingest.hpp"
#include "cdsal/metrics.hpp"
#include "cdsal/pipeline.hpp"
#include "cdsal/stats.hpp"
#include "cdsal/synth.hpp"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cdsal;

constexpr int kExitConfig = 2;
constexpr int kExitIngest = 3;
constexpr int kExitInternal = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kInvalidParameter:
    case ErrorKind::kFit:
      return kExitConfig;
    case ErrorKind::kParse:
    case ErrorKind::kValidation:
    case ErrorKind::kDimension:
    case ErrorKind::kInvalidGeometry:
    case ErrorKind::kOutOfBounds:
      return kExitIngest;
    default:
      return kExitInternal;
  }
}

int report(const std::string& kind, const std::string& message, int code,
           const std::string& file = "", std::size_t line = 0) {
  nlohmann::ordered_json err;
  err["error"]["kind"] = kind;
  err["error"]["message"] = message;
  if (!file.empty()) {
    err["error"]["file"] = file;
    err["error"]["line"] = line;
  }
  err["error"]["exit_code"] = code;
  std::cerr << err.dump() << '\n';
  return code;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

MetricId require_metric(const std::string& name) {
  const auto id = parse_metric(name);
  if (!id) throw Error(ErrorKind::kConfig, "unknown metric '" + name + "'");
  return *id;
}

void emit(const fs::path& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::kConfig, "cannot write " + out.string());
  file << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed-domain saliency evaluation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CDSAL_VERSION);

  // evaluate
  std::string manifest;
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  int workers = 0;
  bool strict = true;
  std::string models;
  std::string metrics;
  int bootstrap = 0;
  std::string center_bias;
  bool no_plots = false;

  auto* evaluate = app.add_subcommand("evaluate", "Score models against gaze and write reports");
  evaluate->add_option("--manifest", manifest, "Dataset manifest (JSON)");
  evaluate->add_option("--config", config_path, "Run configuration (JSON)");
  evaluate->add_option("--out", out, "Output directory");
  auto* seed_opt = evaluate->add_option("--seed", seed, "Seed for control-point sampling");
  evaluate->add_option("--workers", workers, "Sequences scored concurrently")->check(CLI::PositiveNumber);
  evaluate->add_flag("--strict-parse,!--lenient-parse", strict, "Reject unknown keys and columns");
  evaluate->add_option("--models", models, "Comma-separated model ids");
  evaluate->add_option("--metrics", metrics, "Comma-separated metric names");
  evaluate->add_option("--bootstrap", bootstrap, "Control-set replicates per frame")->check(CLI::PositiveNumber);
  evaluate->add_option("--center-bias", center_bias, "Center-bias model file, or 'fit'");
  evaluate->add_flag("--no-plots", no_plots, "Skip SVG plots");

  // synth
  std::string spec_path;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("spec", spec_path, "Synthetic dataset spec (JSON)")->required();
  synth->add_option("--out", out, "Output directory")->required();
  auto* synth_seed = synth->add_option("--seed", seed, "Override every sequence's seed");

  // fit-bias
  auto* fit = app.add_subcommand("fit-bias", "Fit the center-bias prior over a manifest");
  fit->add_option("--manifest", manifest, "Dataset manifest (JSON)")->required();
  fit->add_option("--out", out, "Output model file")->required();
  fit->add_flag("--strict-parse,!--lenient-parse", strict, "Reject unknown keys and columns");

  // rank / top
  std::string summary_path;
  std::string metric_name_arg;
  std::string exclude;
  auto* rank = app.add_subcommand("rank", "Rank sequences by mean score across models");
  rank->add_option("--summary", summary_path, "summary.csv from evaluate")->required();
  rank->add_option("--metric", metric_name_arg, "Metric name")->required();
  auto* rank_exclude = rank->add_option("--exclude", exclude, "Comma-separated models to leave out");
  rank->add_option("--out", out, "Output CSV (default stdout)");

  auto* top = app.add_subcommand("top", "Count top-performer appearances per model");
  top->add_option("--summary", summary_path, "summary.csv from evaluate")->required();
  top->add_option("--metric", metric_name_arg, "Metric name")->required();
  auto* top_exclude = top->add_option("--exclude", exclude, "Comma-separated models to leave out");
  top->add_option("--out", out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  std::vector<std::string> warnings;
  ParseOptions parse{strict ? ParseMode::kStrict : ParseMode::kLenient, &warnings};

  try {
    if (*evaluate) {
      RunConfig config;
      if (!config_path.empty()) apply_config_file(config_path, config);
      if (!manifest.empty()) config.manifest = manifest;
      if (!out.empty()) config.out_dir = out;
      if (*seed_opt) {
        config.metrics.seed = seed;
        config.seed_given = true;
      }
      if (workers > 0) config.workers = workers;
      if (!models.empty()) config.models = split_list(models);
      if (!metrics.empty()) {
        config.metrics.metrics.clear();
        for (const std::string& m : split_list(metrics)) config.metrics.metrics.push_back(require_metric(m));
      }
      if (bootstrap > 0) config.metrics.bootstrap = bootstrap;
      if (!center_bias.empty()) config.center_bias = center_bias == "fit" ? fs::path() : fs::path(center_bias);
      if (no_plots) config.plots = false;
      config.parse = parse;
      if (config.manifest.empty()) throw Error(ErrorKind::kConfig, "--manifest is required");
      const Evaluation result = run_evaluate(config);
      print_warnings(warnings);
      print_warnings(result.warnings);
      std::cerr << "wrote " << result.scores.size() << " score records to "
                << config.out_dir.string() << '\n';
    } else if (*synth) {
      std::vector<SynthSpec> specs = load_synth_specs(spec_path);
      std::vector<SequenceBundle> bundles;
      for (SynthSpec& s : specs) {
        if (*synth_seed) s.seed = mix_seed(seed, hash_string(s.id));
        bundles.push_back(generate(s));
      }
      const fs::path path = write_dataset(out, bundles);
      std::cerr << "wrote " << bundles.size() << " sequences; manifest " << path.string() << '\n';
    } else if (*fit) {
      const Manifest m = load_manifest(manifest, parse);
      std::vector<SequenceBundle> bundles;
      for (const ManifestEntry& e : m.sequences) bundles.push_back(load_bundle(e, parse));
      const CenterBiasModel model = fit_dataset_bias(bundles);
      save_center_bias(out, model);
      print_warnings(warnings);
      std::cerr << "fitted center bias on " << model.sample_count << " gaze points\n";
    } else if (*rank) {
      const Summary summary = load_summary(summary_path);
      const MetricId id = require_metric(metric_name_arg);
      std::set<std::string> excluded = {"io", "gauss"};
      if (*rank_exclude) {
        const auto list = split_list(exclude);
        excluded = std::set<std::string>(list.begin(), list.end());
      }
      std::ostringstream text;
      text << "rank,sequence,score\n";
      const auto ranking = rank_sequences(summary, id, excluded);
      for (std::size_t i = 0; i < ranking.size(); ++i) {
        text << i + 1 << ',' << ranking[i].sequence << ',';
        if (std::isnan(ranking[i].score)) {
          text << "NA\n";
        } else {
          text << ranking[i].score << '\n';
        }
      }
      emit(out, text.str());
    } else if (*top) {
      const Summary summary = load_summary(summary_path);
      const MetricId id = require_metric(metric_name_arg);
      std::set<std::string> excluded = {"io"};
      if (*top_exclude) {
        const auto list = split_list(exclude);
        excluded = std::set<std::string>(list.begin(), list.end());
      }
      std::ostringstream text;
      text << "model,count\n";
      for (const auto& [model, count] : top_performers(summary, id, excluded)) {
        text << model << ',' << count << '\n';
      }
      emit(out, text.str());
    }
  } catch (const ParseError& e) {
    print_warnings(warnings);
    return report("parse", e.what(), kExitIngest, e.file(), e.line());
  } catch (const Error& e) {
    print_warnings(warnings);
    return report(std::string(to_string(e.kind())), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report("internal", e.what(), kExitInternal);
  }
  return 0;
}
