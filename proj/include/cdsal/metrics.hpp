#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cdsal/centerbias.hpp"
#include "cdsal/core.hpp"

namespace cdsal {

// For each point, the largest map value over pixels whose centers lie within
// `radius_px` of the point, always including the pixel containing it (radius
// 0 is a plain nearest-pixel lookup). Throws kOutOfBounds for points outside
// the map.
std::vector<double> gather_gaze_values(const Grid& map,
                                       std::span<const Point> points,
                                       double radius_px);

// Probability that a random positive outranks a random negative, ties worth
// one half. Rank-sum computation; throws kDegenerate on an empty set.
double auc(std::span<const double> positives, std::span<const double> negatives);

// Discrete distribution over r equal-width bins of [0, 1].
struct Histogram {
  std::vector<double> mass;
  std::size_t bins() const { return mass.size(); }
};

// Bin k holds [k/r, (k+1)/r); the last bin is closed at 1. Throws
// kInvalidParameter for values outside [0, 1], kDegenerate for an empty sample.
Histogram make_histogram(std::span<const double> values, int bins);
std::pair<Histogram, Histogram> build_histograms(std::span<const double> positives,
                                                 std::span<const double> negatives,
                                                 int bins = 16);

// Divergence that may be unbounded: `infinite` marks a P(i) > 0 = Q(i) bin.
struct Divergence {
  double value = 0.0;
  bool infinite = false;

  static Divergence finite(double v) { return {v, false}; }
  static Divergence unbounded() { return {0.0, true}; }
};

Divergence kld(const Histogram& p, const Histogram& q, double base = 2.0);
Divergence jd(const Histogram& p, const Histogram& q, double base = 2.0);
// Base-2 Jensen-Shannon divergence, always in [0, 1].
double jsd(const Histogram& p, const Histogram& q);

// Mean z-scored saliency (sample SD) at the gaze points, local-max gathered.
// Throws kDegenerate for a constant map.
double nss(const Grid& map, std::span<const Point> gaze, double radius_px);

// Pearson correlation over paired pixels. Throws kDegenerate if either map is
// constant, kDimension on a shape mismatch.
double pcc(const Grid& saliency, const Grid& ground_truth);
double pcc(const SaliencyMap& saliency, const GroundTruthMap& ground_truth);

// Unit impulses at the gaze pixels convolved with a peak-1 Gaussian of
// `sigma_px` (truncated at 4 sigma), sum-combined.
GroundTruthMap build_ground_truth(std::span<const Point> gaze, Dims dims,
                                  double sigma_px);

enum class SamplerKind { kUniform, kCenterBias };

class ControlSampler {
 public:
  static ControlSampler uniform() { return ControlSampler(SamplerKind::kUniform, {}); }
  static ControlSampler center_bias(const CenterBiasModel& model) {
    return ControlSampler(SamplerKind::kCenterBias, model);
  }
  SamplerKind kind() const { return kind_; }
  const CenterBiasModel& model() const { return model_; }

 private:
  ControlSampler(SamplerKind kind, CenterBiasModel model)
      : kind_(kind), model_(model) {}
  SamplerKind kind_;
  CenterBiasModel model_;
};

// n i.i.d. control points (continuous map coordinates) from the sampler,
// redrawn whenever one lands on an excluded pixel. Deterministic in `seed`.
// Throws kSampling when fewer than n pixels remain after exclusion.
std::vector<Point> sample_controls(Dims frame, std::size_t n,
                                   const ControlSampler& sampler,
                                   std::uint64_t seed,
                                   std::span<const Point> exclusion);

enum class MetricId { kAuc, kAucPrime, kKld, kJd, kJsd, kJsdPrime, kNss, kNssPrime, kPcc };

std::string_view metric_name(MetricId id);
std::optional<MetricId> parse_metric(std::string_view name);
const std::vector<MetricId>& all_metrics();
// KLD and JD are opt-in.
const std::vector<MetricId>& default_metrics();

struct MetricConfig {
  std::vector<MetricId> metrics = default_metrics();
  int bootstrap = 100;
  int bins = 16;
  double radius_deg = 0.5;
  double ground_truth_sigma_deg = 1.0;
  std::uint64_t seed = 0;
  WeightedNormalization normalization;

  bool wants(MetricId id) const;
  bool needs_center_bias() const;
  // Throws kConfig for non-positive B/r or a negative radius.
  void validate() const;
};

enum class ScoreStatus { kOk, kUnscored, kDegenerate, kInfinite };
std::string_view to_string(ScoreStatus status);

struct MetricValue {
  MetricId metric = MetricId::kAuc;
  ScoreStatus status = ScoreStatus::kOk;
  double value = 0.0;
  std::string note;  // reason for a non-ok status
};

struct FrameRecord {
  bool scored = false;
  std::vector<MetricValue> values;  // in MetricConfig order

  const MetricValue* find(MetricId id) const;
};

// Everything about one frame that does not depend on the model under test:
// gaze, bootstrap control sets, ground truth and the prior. Built once and
// shared by every model scored on the frame, so models see identical
// controls.
struct FrameContext {
  Dims dims;
  std::vector<Point> gaze;  // map pixels
  double radius_px = 0.0;
  std::vector<std::vector<Point>> uniform_controls;      // one per replicate
  std::vector<std::vector<Point>> center_bias_controls;  // one per replicate
  const Grid* density = nullptr;                // needed by nss_p
  std::optional<GroundTruthMap> ground_truth;   // built when pcc is requested
};

// Per-replicate seeds are frame_seed * B + k.
FrameContext make_frame_context(Dims dims, std::vector<Point> gaze,
                                const MetricConfig& config, double radius_px,
                                double ground_truth_sigma_px,
                                const CenterBiasModel* center_bias,
                                const Grid* density, std::uint64_t frame_seed);

// Scores a [0, 1]-normalized map. Degenerate metrics are recorded per metric
// and never abort the frame; a frame without gaze is marked unscored.
FrameRecord score_frame(const SaliencyMap& map, const FrameContext& context,
                        const MetricConfig& config);

// Stable 64-bit mix used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t hash_string(std::string_view text);

}  // namespace cdsal
