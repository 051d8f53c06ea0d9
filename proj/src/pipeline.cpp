#include "cdsal/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "cdsal/models.hpp"
#include "cdsal/report.hpp"

#ifndef CDSAL_VERSION
#define CDSAL_VERSION "0.0.0"
#endif

namespace cdsal {

namespace {

std::string_view scale_name(WeightScale s) {
  return s == WeightScale::kUnitMean ? "unit_mean" : "unit_sum";
}

std::string_view spread_name(SpreadForm s) {
  switch (s) {
    case SpreadForm::kWeightedProduct: return "weighted_product";
    case SpreadForm::kWeightedDeviation: return "weighted_deviation";
    case SpreadForm::kWeightedVariance: break;
  }
  return "weighted_variance";
}

void config_error(const std::string& what) { throw Error(ErrorKind::kConfig, what); }

std::vector<MetricId> parse_metric_list(const nlohmann::json& node) {
  if (!node.is_array()) config_error("metrics must be an array of names");
  std::vector<MetricId> out;
  for (const auto& item : node) {
    if (!item.is_string()) config_error("metric names must be strings");
    const auto id = parse_metric(item.get<std::string>());
    if (!id) config_error("unknown metric '" + item.get<std::string>() + "'");
    out.push_back(*id);
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

bool uses_controls(const MetricConfig& config) {
  for (MetricId id : {MetricId::kAuc, MetricId::kAucPrime, MetricId::kJsd, MetricId::kJsdPrime,
                      MetricId::kKld, MetricId::kJd}) {
    if (config.wants(id)) return true;
  }
  return false;
}

void RunConfig::validate() const {
  if (models.empty()) config_error("no models selected");
  std::set<std::string> seen;
  for (const std::string& id : models) {
    const auto& known = model_ids();
    if (std::find(known.begin(), known.end(), id) == known.end()) {
      config_error("unknown model '" + id + "'");
    }
    if (!seen.insert(id).second) config_error("model '" + id + "' listed twice");
  }
  metrics.validate();
  if (uses_controls(metrics) && !seed_given) {
    config_error("a seed is required when sampled metrics (auc, auc_p, jsd, jsd_p, kld, jd) are enabled");
  }
  if (workers < 1) config_error("workers must be >= 1");
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["manifest"] = manifest.generic_string();
  j["models"] = models;
  nlohmann::ordered_json m = nlohmann::ordered_json::array();
  for (MetricId id : metrics.metrics) m.push_back(std::string(metric_name(id)));
  j["metrics"] = std::move(m);
  j["bootstrap"] = metrics.bootstrap;
  j["bins"] = metrics.bins;
  j["radius_deg"] = metrics.radius_deg;
  j["ground_truth_sigma_deg"] = metrics.ground_truth_sigma_deg;
  if (seed_given) {
    j["seed"] = metrics.seed;
  } else {
    j["seed"] = nullptr;
  }
  j["normalization"] = {{"scale", scale_name(metrics.normalization.scale)},
                        {"spread", spread_name(metrics.normalization.spread)}};
  j["center_bias"] = center_bias.empty() ? std::string("fit") : center_bias.generic_string();
  j["plots"] = plots;
  return j;
}

void apply_config_file(const std::filesystem::path& path, RunConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot open config " + path.string());
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  if (!root.is_object()) config_error(path.string() + ": config must be a JSON object");
  static const std::set<std::string> known = {
      "manifest", "out", "models", "metrics", "bootstrap", "bins", "radius_deg",
      "ground_truth_sigma_deg", "seed", "center_bias", "plots", "workers", "normalization"};
  for (const auto& item : root.items()) {
    if (!known.count(item.key())) config_error(path.string() + ": unknown key '" + item.key() + "'");
  }
  const std::filesystem::path base = path.parent_path();
  try {
    if (root.contains("manifest")) config.manifest = resolve(base, root["manifest"].get<std::string>());
    if (root.contains("out")) config.out_dir = resolve(base, root["out"].get<std::string>());
    if (root.contains("models")) config.models = root["models"].get<std::vector<std::string>>();
    if (root.contains("metrics")) config.metrics.metrics = parse_metric_list(root["metrics"]);
    if (root.contains("bootstrap")) config.metrics.bootstrap = root["bootstrap"].get<int>();
    if (root.contains("bins")) config.metrics.bins = root["bins"].get<int>();
    if (root.contains("radius_deg")) config.metrics.radius_deg = root["radius_deg"].get<double>();
    if (root.contains("ground_truth_sigma_deg")) {
      config.metrics.ground_truth_sigma_deg = root["ground_truth_sigma_deg"].get<double>();
    }
    if (root.contains("seed")) {
      config.metrics.seed = root["seed"].get<std::uint64_t>();
      config.seed_given = true;
    }
    if (root.contains("center_bias")) {
      const std::string cb = root["center_bias"].get<std::string>();
      config.center_bias = cb == "fit" ? std::filesystem::path() : resolve(base, cb);
    }
    if (root.contains("plots")) config.plots = root["plots"].get<bool>();
    if (root.contains("workers")) config.workers = root["workers"].get<int>();
    if (root.contains("normalization")) {
      const auto& n = root["normalization"];
      for (const auto& item : n.items()) {
        if (item.key() != "scale" && item.key() != "spread") {
          config_error("unknown normalization key '" + item.key() + "'");
        }
      }
      if (n.contains("scale")) {
        const std::string s = n["scale"].get<std::string>();
        if (s == "unit_mean") {
          config.metrics.normalization.scale = WeightScale::kUnitMean;
        } else if (s == "unit_sum") {
          config.metrics.normalization.scale = WeightScale::kUnitSum;
        } else {
          config_error("normalization.scale must be unit_mean or unit_sum");
        }
      }
      if (n.contains("spread")) {
        const std::string s = n["spread"].get<std::string>();
        if (s == "weighted_product") {
          config.metrics.normalization.spread = SpreadForm::kWeightedProduct;
        } else if (s == "weighted_deviation") {
          config.metrics.normalization.spread = SpreadForm::kWeightedDeviation;
        } else if (s == "weighted_variance") {
          config.metrics.normalization.spread = SpreadForm::kWeightedVariance;
        } else {
          config_error("normalization.spread must be weighted_product, weighted_deviation or weighted_variance");
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
}

std::vector<GazeSample> collect_gaze(const std::vector<SequenceBundle>& bundles) {
  std::vector<GazeSample> samples;
  for (const SequenceBundle& b : bundles) {
    GazeSample s;
    s.width = b.geometry.display_w_px;
    s.height = b.geometry.display_h_px;
    for (const GazePoint& g : b.gaze.rows()) {
      if (g.viewing == Viewing::kPrimary) s.points.push_back({g.x, g.y});
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

CenterBiasModel fit_dataset_bias(const std::vector<SequenceBundle>& bundles) {
  const std::vector<GazeSample> samples = collect_gaze(bundles);
  return fit_center_bias(samples);
}

std::vector<ScoreRecord> score_sequence(const SequenceBundle& bundle,
                                        const std::vector<std::string>& model_ids,
                                        const nlohmann::json& model_config,
                                        const MetricConfig& metrics,
                                        const CenterBiasModel* prior,
                                        std::vector<std::string>* warnings) {
  std::vector<std::unique_ptr<Model>> models;
  for (const std::string& id : model_ids) {
    const nlohmann::json params =
        model_config.is_object() && model_config.contains(id) ? model_config[id] : nlohmann::json();
    models.push_back(make_model(id, params));
    for (std::string& w : models.back()->check(bundle)) {
      if (warnings != nullptr) warnings->push_back(std::move(w));
    }
  }
  const Dims dims = bundle.map_dims;
  std::optional<Grid> density;
  if (metrics.wants(MetricId::kNssPrime)) {
    if (prior == nullptr) throw Error(ErrorKind::kConfig, "nss_p needs a center-bias model");
    density = evaluate_density(*prior, dims);
  }
  const double radius_px = bundle.degrees_to_pixels(metrics.radius_deg);
  const double gt_sigma_px = bundle.degrees_to_pixels(metrics.ground_truth_sigma_deg);
  const std::uint64_t sequence_seed = mix_seed(metrics.seed, hash_string(bundle.sequence_id));

  std::vector<std::optional<SaliencyMap>> fixed(models.size());
  std::vector<ScoreRecord> records;
  for (std::size_t t = 0; t < bundle.frames.size(); ++t) {
    const FrameFeatures& frame = bundle.frames[t];
    const bool any = std::any_of(models.begin(), models.end(),
                                 [&](const auto& m) { return m->covers(frame.type); });
    if (!any) continue;
    const FrameContext context = make_frame_context(
        dims, bundle.map_gaze(frame.frame, Viewing::kPrimary), metrics, radius_px, gt_sigma_px,
        prior, density ? &*density : nullptr,
        mix_seed(sequence_seed, static_cast<std::uint64_t>(frame.frame)));
    for (std::size_t m = 0; m < models.size(); ++m) {
      const Model& model = *models[m];
      if (!model.covers(frame.type)) continue;
      SaliencyMap map;
      if (model.content_independent()) {
        if (!fixed[m]) fixed[m] = minmax_normalize(model.predict(bundle, t));
        map = *fixed[m];
      } else {
        map = minmax_normalize(model.predict(bundle, t));
      }
      const FrameRecord scored = score_frame(map, context, metrics);
      for (const MetricValue& v : scored.values) {
        records.push_back({std::string(model.id()), bundle.sequence_id, frame.frame, frame.type,
                           v.metric, v.status, v.value});
      }
    }
  }
  return records;
}

Evaluation evaluate(const RunConfig& config, const std::vector<SequenceBundle>& bundles,
                    const nlohmann::json& model_config) {
  config.validate();
  if (bundles.empty()) throw Error(ErrorKind::kConfig, "manifest lists no sequences");
  Evaluation result;
  const bool needs_prior = config.metrics.needs_center_bias();
  if (!config.center_bias.empty()) {
    result.center_bias = load_center_bias(config.center_bias);
  } else if (needs_prior) {
    result.center_bias = fit_dataset_bias(bundles);
  }
  const CenterBiasModel* prior = result.center_bias ? &*result.center_bias : nullptr;

  // Validate model ids and parameters once, before any work starts.
  for (const std::string& id : config.models) {
    const nlohmann::json params =
        model_config.is_object() && model_config.contains(id) ? model_config[id] : nlohmann::json();
    make_model(id, params);
  }

  const std::size_t n = bundles.size();
  std::vector<std::vector<ScoreRecord>> per_sequence(n);
  std::vector<std::vector<std::string>> per_warnings(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        per_sequence[i] = score_sequence(bundles[i], config.models, model_config, config.metrics,
                                         prior, &per_warnings[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(config.workers), n);
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::set<std::tuple<std::string, int>> unscored;
  for (std::size_t i = 0; i < n; ++i) {
    for (ScoreRecord& r : per_sequence[i]) {
      if (r.status == ScoreStatus::kDegenerate) ++result.degenerate[std::string(metric_name(r.metric))];
      if (r.status == ScoreStatus::kUnscored) unscored.insert({r.sequence, r.frame});
      result.scores.add(std::move(r));
    }
    for (std::string& w : per_warnings[i]) result.warnings.push_back(std::move(w));
  }
  result.unscored_frames = unscored.size();
  result.scores.sort();
  return result;
}

void write_outputs(const RunConfig& config, const Evaluation& evaluation) {
  const std::filesystem::path& out = config.out_dir;
  std::filesystem::create_directories(out);
  write_scores(out / "scores.csv", evaluation.scores);
  const Summary pooled = aggregate(evaluation.scores, FrameScope::kPooled);
  write_summary(out / "summary.csv", pooled);
  write_summary(out / "summary_iframes.csv", aggregate(evaluation.scores, FrameScope::kIFrames));
  write_summary(out / "summary_pframes.csv", aggregate(evaluation.scores, FrameScope::kPFrames));

  std::vector<std::pair<MetricId, std::vector<RankEntry>>> rankings;
  std::vector<std::pair<MetricId, std::map<std::string, int>>> tops;
  for (MetricId m : config.metrics.metrics) {
    rankings.emplace_back(m, rank_sequences(pooled, m));
    tops.emplace_back(m, top_performers(pooled, m));
  }
  write_ranking(out / "ranking.csv", rankings);
  write_top_performers(out / "top_performers.csv", tops);
  if (evaluation.center_bias) save_center_bias(out / "center_bias.json", *evaluation.center_bias);

  if (config.plots) {
    const std::filesystem::path plots = out / "plots";
    std::filesystem::create_directories(plots);
    for (MetricId m : config.metrics.metrics) {
      const std::string name(metric_name(m));
      write_text(plots / ("heatmap_" + name + ".svg"),
                 heatmap_svg(pooled, m, "Mean " + name + " per model and sequence"));
      write_text(plots / ("bars_" + name + ".svg"),
                 bar_chart_svg(pooled, m, "Mean " + name + " per model (error bars: SEM)"));
    }
  }

  nlohmann::ordered_json run;
  run["toolkit"] = "cdsal";
  run["version"] = CDSAL_VERSION;
  run["config"] = config.to_json();
  if (evaluation.center_bias) {
    const CenterBiasModel& cb = *evaluation.center_bias;
    run["center_bias"] = {{"source", config.center_bias.empty() ? "fit" : "file"},
                          {"mean", {cb.mean.x, cb.mean.y}},
                          {"covariance", {{cb.covariance.xx, cb.covariance.xy},
                                          {cb.covariance.xy, cb.covariance.yy}}},
                          {"sample_count", cb.sample_count}};
  }
  run["score_records"] = evaluation.scores.size();
  run["unscored_frames"] = evaluation.unscored_frames;
  nlohmann::ordered_json degenerate = nlohmann::ordered_json::object();
  for (MetricId m : config.metrics.metrics) {
    const auto it = evaluation.degenerate.find(std::string(metric_name(m)));
    degenerate[std::string(metric_name(m))] = it == evaluation.degenerate.end() ? 0 : it->second;
  }
  run["degenerate_frames"] = std::move(degenerate);
  run["warnings"] = evaluation.warnings;
  write_text(out / "run.json", run.dump(2) + "\n");
}

Evaluation run_evaluate(const RunConfig& config) {
  config.validate();
  if (config.out_dir.empty()) throw Error(ErrorKind::kConfig, "an output directory is required");
  const Manifest manifest = load_manifest(config.manifest, config.parse);
  std::vector<SequenceBundle> bundles;
  for (const ManifestEntry& e : manifest.sequences) bundles.push_back(load_bundle(e, config.parse));
  Evaluation evaluation = evaluate(config, bundles, manifest.model_config);
  write_outputs(config, evaluation);
  return evaluation;
}

}  // namespace cdsal
