#include "cdsal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cdsal {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word.
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_string(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> gather_gaze_values(const Grid& map,
                                       std::span<const Point> points,
                                       double radius_px) {
  if (radius_px < 0.0 || !std::isfinite(radius_px)) {
    throw Error(ErrorKind::kInvalidParameter, "gather radius must be >= 0");
  }
  std::vector<double> values;
  values.reserve(points.size());
  const double r2 = radius_px * radius_px;
  for (const Point& p : points) {
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x < map.width() && p.y < map.height())) {
      throw Error(ErrorKind::kOutOfBounds, "gaze point outside the map");
    }
    double best = map(pixel_index(p.x), pixel_index(p.y));
    if (radius_px > 0.0) {
      const int y0 = std::max(0, pixel_index(p.y - radius_px - 0.5));
      const int y1 = std::min(map.height() - 1, pixel_index(p.y + radius_px - 0.5) + 1);
      const int x0 = std::max(0, pixel_index(p.x - radius_px - 0.5));
      const int x1 = std::min(map.width() - 1, pixel_index(p.x + radius_px - 0.5) + 1);
      for (int y = y0; y <= y1; ++y) {
        const double dy = pixel_center(y) - p.y;
        const double rem = r2 - dy * dy;
        if (rem < 0.0) continue;
        for (int x = x0; x <= x1; ++x) {
          const double dx = pixel_center(x) - p.x;
          if (dx * dx <= rem) best = std::max(best, map(x, y));
        }
      }
    }
    values.push_back(best);
  }
  return values;
}

double auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorKind::kDegenerate, "AUC needs nonempty positive and negative sets");
  }
  struct Entry {
    double value;
    bool positive;
  };
  std::vector<Entry> all;
  all.reserve(positives.size() + negatives.size());
  for (double v : positives) all.push_back({v, true});
  for (double v : negatives) all.push_back({v, false});
  for (const Entry& e : all) {
    if (!std::isfinite(e.value)) {
      throw Error(ErrorKind::kInvalidParameter, "AUC samples must be finite");
    }
  }
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });

  // Twice the positive rank sum, with tied groups sharing their mid-rank,
  // kept in integers so ties and symmetry are exact.
  std::uint64_t rank_sum_x2 = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i + 1;
    while (j < all.size() && all[j].value == all[i].value) ++j;
    const std::uint64_t midrank_x2 = i + 1 + j;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].positive) rank_sum_x2 += midrank_x2;
    }
    i = j;
  }
  const std::uint64_t np = positives.size();
  const std::uint64_t nn = negatives.size();
  const std::uint64_t wins_x2 = rank_sum_x2 - np * (np + 1);
  const std::uint64_t pairs_x2 = 2 * np * nn;
  // Divide on the side closer to zero so auc(N, P) == 1 - auc(P, N) bitwise.
  if (2 * wins_x2 <= pairs_x2) {
    return static_cast<double>(wins_x2) / static_cast<double>(pairs_x2);
  }
  return 1.0 - static_cast<double>(pairs_x2 - wins_x2) / static_cast<double>(pairs_x2);
}

Histogram make_histogram(std::span<const double> values, int bins) {
  if (bins < 1) throw Error(ErrorKind::kInvalidParameter, "histogram needs >= 1 bin");
  if (values.empty()) throw Error(ErrorKind::kDegenerate, "histogram of an empty sample");
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorKind::kInvalidParameter,
                  "histogram values must lie in [0, 1]; normalize the map first");
    }
    const int k = std::min(bins - 1, static_cast<int>(std::floor(v * bins)));
    ++counts[static_cast<std::size_t>(k)];
  }
  Histogram h;
  h.mass.resize(counts.size());
  const double n = static_cast<double>(values.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    h.mass[k] = static_cast<double>(counts[k]) / n;
  }
  return h;
}

std::pair<Histogram, Histogram> build_histograms(std::span<const double> positives,
                                                 std::span<const double> negatives,
                                                 int bins) {
  return {make_histogram(positives, bins), make_histogram(negatives, bins)};
}

namespace {

void check_bins(const Histogram& p, const Histogram& q) {
  if (p.bins() != q.bins() || p.bins() == 0) {
    throw Error(ErrorKind::kDimension, "histograms must share a non-empty bin structure");
  }
}

}  // namespace

Divergence kld(const Histogram& p, const Histogram& q, double base) {
  check_bins(p, q);
  if (!(base > 0.0) || base == 1.0) {
    throw Error(ErrorKind::kInvalidParameter, "logarithm base must be positive and != 1");
  }
  const double inv_log_base = 1.0 / std::log(base);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) {
    if (p.mass[i] <= 0.0) continue;
    if (q.mass[i] <= 0.0) return Divergence::unbounded();
    sum += p.mass[i] * std::log(p.mass[i] / q.mass[i]) * inv_log_base;
  }
  return Divergence::finite(std::max(0.0, sum));
}

Divergence jd(const Histogram& p, const Histogram& q, double base) {
  const Divergence forward = kld(p, q, base);
  const Divergence backward = kld(q, p, base);
  if (forward.infinite || backward.infinite) return Divergence::unbounded();
  return Divergence::finite(forward.value + backward.value);
}

double jsd(const Histogram& p, const Histogram& q) {
  check_bins(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) {
    const double a = p.mass[i];
    const double b = q.mass[i];
    const double m = 0.5 * (a + b);
    const double ta = a > 0.0 ? a * std::log2(a / m) : 0.0;
    const double tb = b > 0.0 ? b * std::log2(b / m) : 0.0;
    sum += ta + tb;
  }
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

double nss(const Grid& map, std::span<const Point> gaze, double radius_px) {
  if (gaze.empty()) throw Error(ErrorKind::kDegenerate, "NSS needs gaze points");
  const auto values = map.values();
  if (values.size() < 2) throw Error(ErrorKind::kDegenerate, "NSS needs >= 2 pixels");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw Error(ErrorKind::kDegenerate, "NSS of a constant map");
  // z-scoring is increasing, so the local maximum commutes with it.
  const std::vector<double> raw = gather_gaze_values(map, gaze, radius_px);
  double total = 0.0;
  for (double v : raw) total += (v - mean) / sd;
  return total / static_cast<double>(raw.size());
}

double pcc(const Grid& saliency, const Grid& ground_truth) {
  if (saliency.dims() != ground_truth.dims()) {
    throw Error(ErrorKind::kDimension, "PCC maps differ in shape");
  }
  const auto s = saliency.values();
  const auto g = ground_truth.values();
  const double n = static_cast<double>(s.size());
  double ms = 0.0;
  double mg = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ms += s[i];
    mg += g[i];
  }
  ms /= n;
  mg /= n;
  double cov = 0.0;
  double vs = 0.0;
  double vg = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double ds = s[i] - ms;
    const double dg = g[i] - mg;
    cov += ds * dg;
    vs += ds * ds;
    vg += dg * dg;
  }
  if (!(vs > 0.0) || !(vg > 0.0)) {
    throw Error(ErrorKind::kDegenerate, "PCC with a constant map");
  }
  return std::clamp(cov / std::sqrt(vs * vg), -1.0, 1.0);
}

double pcc(const SaliencyMap& saliency, const GroundTruthMap& ground_truth) {
  return pcc(saliency.grid(), ground_truth.grid());
}

GroundTruthMap build_ground_truth(std::span<const Point> gaze, Dims dims,
                                  double sigma_px) {
  if (!(sigma_px > 0.0) || !std::isfinite(sigma_px)) {
    throw Error(ErrorKind::kInvalidParameter, "ground-truth sigma must be positive");
  }
  Grid grid(dims);
  const int reach = static_cast<int>(std::floor(4.0 * sigma_px));
  std::vector<double> taps(static_cast<std::size_t>(reach) + 1);
  for (int k = 0; k <= reach; ++k) {
    taps[static_cast<std::size_t>(k)] =
        std::exp(-static_cast<double>(k) * k / (2.0 * sigma_px * sigma_px));
  }
  const double cutoff = 16.0 * sigma_px * sigma_px;
  for (const Point& p : gaze) {
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x < dims.width && p.y < dims.height)) {
      throw Error(ErrorKind::kOutOfBounds, "gaze point outside the frame");
    }
    const int cx = pixel_index(p.x);
    const int cy = pixel_index(p.y);
    for (int y = std::max(0, cy - reach); y <= std::min(dims.height - 1, cy + reach); ++y) {
      const int dy = std::abs(y - cy);
      const double ty = taps[static_cast<std::size_t>(dy)];
      for (int x = std::max(0, cx - reach); x <= std::min(dims.width - 1, cx + reach); ++x) {
        const int dx = std::abs(x - cx);
        if (static_cast<double>(dx * dx + dy * dy) <= cutoff) {
          grid(x, y) += taps[static_cast<std::size_t>(dx)] * ty;
        }
      }
    }
  }
  return GroundTruthMap(std::move(grid));
}

std::vector<Point> sample_controls(Dims frame, std::size_t n,
                                   const ControlSampler& sampler, std::uint64_t seed,
                                   std::span<const Point> exclusion) {
  if (n == 0) throw Error(ErrorKind::kInvalidParameter, "control count must be >= 1");
  if (frame.width <= 0 || frame.height <= 0) {
    throw Error(ErrorKind::kDimension, "control sampling needs a non-empty frame");
  }
  std::vector<std::size_t> excluded;
  excluded.reserve(exclusion.size());
  for (const Point& p : exclusion) {
    const int x = pixel_index(p.x);
    const int y = pixel_index(p.y);
    if (x >= 0 && y >= 0 && x < frame.width && y < frame.height) {
      excluded.push_back(static_cast<std::size_t>(y) * frame.width + x);
    }
  }
  std::sort(excluded.begin(), excluded.end());
  excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());
  if (frame.pixel_count() - excluded.size() < n) {
    throw Error(ErrorKind::kSampling, "frame has fewer than " + std::to_string(n) +
                                          " pixels available after exclusion");
  }
  const auto is_excluded = [&](const Point& p) {
    const std::size_t idx =
        static_cast<std::size_t>(pixel_index(p.y)) * frame.width + pixel_index(p.x);
    return std::binary_search(excluded.begin(), excluded.end(), idx);
  };

  if (sampler.kind() == SamplerKind::kCenterBias) sampler.model().validate();
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(sampler.kind())));
  std::uniform_real_distribution<double> ux(0.0, frame.width);
  std::uniform_real_distribution<double> uy(0.0, frame.height);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t max_draws = 10000 + 1000 * n;
  std::vector<Point> out;
  out.reserve(n);
  std::size_t draws = 0;
  while (out.size() < n) {
    if (++draws > max_draws) {
      throw Error(ErrorKind::kSampling,
                  "control sampler rejected too many draws (prior mass off-frame?)");
    }
    std::optional<Point> p;
    if (sampler.kind() == SamplerKind::kUniform) {
      p = Point{ux(rng), uy(rng)};
      if (p->x >= frame.width || p->y >= frame.height) continue;
    } else {
      const double z1 = normal(rng);
      const double z2 = normal(rng);
      p = transform_standard_normal(sampler.model(), frame, z1, z2);
      if (!p) continue;
    }
    if (is_excluded(*p)) continue;
    out.push_back(*p);
  }
  return out;
}

std::string_view metric_name(MetricId id) {
  switch (id) {
    case MetricId::kAuc: return "auc";
    case MetricId::kAucPrime: return "auc_p";
    case MetricId::kKld: return "kld";
    case MetricId::kJd: return "jd";
    case MetricId::kJsd: return "jsd";
    case MetricId::kJsdPrime: return "jsd_p";
    case MetricId::kNss: return "nss";
    case MetricId::kNssPrime: return "nss_p";
    case MetricId::kPcc: return "pcc";
  }
  return "?";
}

const std::vector<MetricId>& all_metrics() {
  static const std::vector<MetricId> ids = {
      MetricId::kAuc, MetricId::kAucPrime, MetricId::kKld, MetricId::kJd,
      MetricId::kJsd, MetricId::kJsdPrime, MetricId::kNss, MetricId::kNssPrime,
      MetricId::kPcc};
  return ids;
}

const std::vector<MetricId>& default_metrics() {
  static const std::vector<MetricId> ids = {
      MetricId::kAuc, MetricId::kAucPrime, MetricId::kJsd, MetricId::kJsdPrime,
      MetricId::kNss, MetricId::kNssPrime, MetricId::kPcc};
  return ids;
}

std::optional<MetricId> parse_metric(std::string_view name) {
  for (MetricId id : all_metrics()) {
    if (metric_name(id) == name) return id;
  }
  return std::nullopt;
}

bool MetricConfig::wants(MetricId id) const {
  return std::find(metrics.begin(), metrics.end(), id) != metrics.end();
}

bool MetricConfig::needs_center_bias() const {
  return wants(MetricId::kAucPrime) || wants(MetricId::kJsdPrime) ||
         wants(MetricId::kNssPrime);
}

void MetricConfig::validate() const {
  if (metrics.empty()) throw Error(ErrorKind::kConfig, "no metrics selected");
  std::vector<MetricId> sorted = metrics;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorKind::kConfig, "metric listed twice");
  }
  if (bootstrap < 1) throw Error(ErrorKind::kConfig, "bootstrap count must be >= 1");
  if (bins < 1) throw Error(ErrorKind::kConfig, "histogram bins must be >= 1");
  if (!(radius_deg >= 0.0)) throw Error(ErrorKind::kConfig, "radius must be >= 0");
  if (!(ground_truth_sigma_deg > 0.0)) {
    throw Error(ErrorKind::kConfig, "ground-truth sigma must be > 0");
  }
}

std::string_view to_string(ScoreStatus status) {
  switch (status) {
    case ScoreStatus::kOk: return "ok";
    case ScoreStatus::kUnscored: return "unscored";
    case ScoreStatus::kDegenerate: return "degenerate";
    case ScoreStatus::kInfinite: return "inf";
  }
  return "?";
}

const MetricValue* FrameRecord::find(MetricId id) const {
  for (const MetricValue& v : values) {
    if (v.metric == id) return &v;
  }
  return nullptr;
}

FrameContext make_frame_context(Dims dims, std::vector<Point> gaze,
                                const MetricConfig& config, double radius_px,
                                double ground_truth_sigma_px,
                                const CenterBiasModel* center_bias,
                                const Grid* density, std::uint64_t frame_seed) {
  FrameContext ctx;
  ctx.dims = dims;
  ctx.gaze = std::move(gaze);
  ctx.radius_px = radius_px;
  ctx.density = density;
  if (ctx.gaze.empty()) return ctx;

  const bool uniform = config.wants(MetricId::kAuc) || config.wants(MetricId::kJsd) ||
                       config.wants(MetricId::kKld) || config.wants(MetricId::kJd);
  const bool biased = config.wants(MetricId::kAucPrime) || config.wants(MetricId::kJsdPrime);
  if (biased && center_bias == nullptr) {
    throw Error(ErrorKind::kConfig, "center-bias metrics need a center-bias model");
  }
  if (config.wants(MetricId::kNssPrime)) {
    if (density == nullptr || density->dims() != dims) {
      throw Error(ErrorKind::kConfig, "nss_p needs a density map of the frame size");
    }
  }
  const std::uint64_t b = static_cast<std::uint64_t>(config.bootstrap);
  for (std::uint64_t k = 0; k < b; ++k) {
    const std::uint64_t replicate_seed = frame_seed * b + k;
    if (uniform) {
      ctx.uniform_controls.push_back(sample_controls(
          dims, ctx.gaze.size(), ControlSampler::uniform(), replicate_seed, ctx.gaze));
    }
    if (biased) {
      ctx.center_bias_controls.push_back(
          sample_controls(dims, ctx.gaze.size(), ControlSampler::center_bias(*center_bias),
                          replicate_seed, ctx.gaze));
    }
  }
  if (config.wants(MetricId::kPcc)) {
    ctx.ground_truth = build_ground_truth(ctx.gaze, dims, ground_truth_sigma_px);
  }
  return ctx;
}

namespace {

struct ReplicateScores {
  double auc = 0.0;
  double jsd = 0.0;
  double kld = 0.0;
  double jd = 0.0;
  bool kld_infinite = false;
  bool jd_infinite = false;
};

ReplicateScores average_replicates(const Grid& map, std::span<const double> positives,
                                   const std::vector<std::vector<Point>>& controls,
                                   double radius_px, const MetricConfig& config,
                                   bool divergences) {
  ReplicateScores out;
  const Histogram hp = make_histogram(positives, config.bins);
  for (const std::vector<Point>& set : controls) {
    const std::vector<double> negatives = gather_gaze_values(map, set, radius_px);
    out.auc += auc(positives, negatives);
    const Histogram hq = make_histogram(negatives, config.bins);
    out.jsd += jsd(hp, hq);
    if (divergences) {
      const Divergence k = kld(hp, hq);
      const Divergence j = jd(hp, hq);
      out.kld_infinite = out.kld_infinite || k.infinite;
      out.jd_infinite = out.jd_infinite || j.infinite;
      out.kld += k.value;
      out.jd += j.value;
    }
  }
  const double n = static_cast<double>(controls.size());
  out.auc /= n;
  out.jsd /= n;
  out.kld /= n;
  out.jd /= n;
  return out;
}

MetricValue ok(MetricId id, double v) { return {id, ScoreStatus::kOk, v, {}}; }

}  // namespace

FrameRecord score_frame(const SaliencyMap& map, const FrameContext& context,
                        const MetricConfig& config) {
  if (map.dims() != context.dims) {
    throw Error(ErrorKind::kDimension, "map does not match the frame context");
  }
  FrameRecord record;
  if (context.gaze.empty()) {
    for (MetricId id : config.metrics) {
      record.values.push_back({id, ScoreStatus::kUnscored, 0.0, "no gaze"});
    }
    return record;
  }
  record.scored = true;
  const Grid& grid = map.grid();
  for (double v : grid.values()) {
    if (v > 1.0) {
      throw Error(ErrorKind::kInvalidParameter, "score_frame expects a [0,1] map");
    }
  }
  const std::vector<double> positives =
      gather_gaze_values(grid, context.gaze, context.radius_px);

  std::optional<ReplicateScores> uniform;
  std::optional<ReplicateScores> biased;
  const bool divergences = config.wants(MetricId::kKld) || config.wants(MetricId::kJd);
  if (!context.uniform_controls.empty()) {
    uniform = average_replicates(grid, positives, context.uniform_controls,
                                 context.radius_px, config, divergences);
  }
  if (!context.center_bias_controls.empty()) {
    biased = average_replicates(grid, positives, context.center_bias_controls,
                                context.radius_px, config, false);
  }
  const auto missing = [](MetricId id) {
    return MetricValue{id, ScoreStatus::kDegenerate, 0.0, "inputs not prepared"};
  };

  for (MetricId id : config.metrics) {
    try {
      switch (id) {
        case MetricId::kAuc:
          record.values.push_back(uniform ? ok(id, uniform->auc) : missing(id));
          break;
        case MetricId::kJsd:
          record.values.push_back(uniform ? ok(id, uniform->jsd) : missing(id));
          break;
        case MetricId::kKld:
          if (!uniform) {
            record.values.push_back(missing(id));
          } else if (uniform->kld_infinite) {
            record.values.push_back({id, ScoreStatus::kInfinite, 0.0, "empty control bin"});
          } else {
            record.values.push_back(ok(id, uniform->kld));
          }
          break;
        case MetricId::kJd:
          if (!uniform) {
            record.values.push_back(missing(id));
          } else if (uniform->jd_infinite) {
            record.values.push_back({id, ScoreStatus::kInfinite, 0.0, "empty bin"});
          } else {
            record.values.push_back(ok(id, uniform->jd));
          }
          break;
        case MetricId::kAucPrime:
          record.values.push_back(biased ? ok(id, biased->auc) : missing(id));
          break;
        case MetricId::kJsdPrime:
          record.values.push_back(biased ? ok(id, biased->jsd) : missing(id));
          break;
        case MetricId::kNss:
          record.values.push_back(ok(id, nss(grid, context.gaze, context.radius_px)));
          break;
        case MetricId::kNssPrime:
          if (context.density == nullptr) {
            record.values.push_back(missing(id));
          } else {
            record.values.push_back(ok(id, nss_prime(grid, *context.density, context.gaze,
                                                     context.radius_px,
                                                     config.normalization)));
          }
          break;
        case MetricId::kPcc:
          if (!context.ground_truth) {
            record.values.push_back(missing(id));
          } else {
            record.values.push_back(ok(id, pcc(grid, context.ground_truth->grid())));
          }
          break;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerate) throw;
      record.values.push_back({id, ScoreStatus::kDegenerate, 0.0, e.what()});
    }
  }
  return record;
}

}  // namespace cdsal
