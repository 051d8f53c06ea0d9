#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdsal/centerbias.hpp"
#include "cdsal/ingest.hpp"
#include "cdsal/metrics.hpp"
#include "cdsal/stats.hpp"
#include "json.hpp"

namespace cdsal {

struct RunConfig {
  std::filesystem::path manifest;
  std::vector<std::string> models = {"gauss", "io", "mvmag", "pmes", "csdct", "obdl", "gmc-mvmag"};
  MetricConfig metrics;
  bool seed_given = false;
  // Empty: fit the prior on the manifest's primary gaze.
  std::filesystem::path center_bias;
  std::filesystem::path out_dir;
  bool plots = true;
  int workers = 1;
  ParseOptions parse;

  // Throws kConfig: unknown model ids, no seed with stochastic metrics,
  // invalid metric settings.
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

// Overlays a --config JSON file onto `config`. Unknown keys throw kConfig.
void apply_config_file(const std::filesystem::path& path, RunConfig& config);

bool uses_controls(const MetricConfig& config);

// Gaze of every sequence's primary viewing, normalized by its display size.
std::vector<GazeSample> collect_gaze(const std::vector<SequenceBundle>& bundles);
CenterBiasModel fit_dataset_bias(const std::vector<SequenceBundle>& bundles);

struct Evaluation {
  ScoreTable scores;
  std::optional<CenterBiasModel> center_bias;
  std::map<std::string, std::size_t> degenerate;  // metric -> frames
  std::size_t unscored_frames = 0;
  std::vector<std::string> warnings;
};

// Scores every configured model on every sequence. Output depends only on
// the inputs and seed, never on worker count.
Evaluation evaluate(const RunConfig& config, const std::vector<SequenceBundle>& bundles,
                    const nlohmann::json& model_config);

// Scores one sequence; `prior`/`density` may be null when no metric needs
// them. Exposed for benchmarking.
std::vector<ScoreRecord> score_sequence(const SequenceBundle& bundle,
                                        const std::vector<std::string>& model_ids,
                                        const nlohmann::json& model_config,
                                        const MetricConfig& metrics,
                                        const CenterBiasModel* prior,
                                        std::vector<std::string>* warnings);

// Writes scores.csv, summary*.csv, ranking.csv, top_performers.csv,
// center_bias.json (when used), run.json and plots/.
void write_outputs(const RunConfig& config, const Evaluation& evaluation);

// Loads the manifest, evaluates and writes everything.
Evaluation run_evaluate(const RunConfig& config);

}  // namespace cdsal
