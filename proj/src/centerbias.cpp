#include "cdsal/centerbias.hpp"

#include <algorithm>
#include <fstream>

#include "cdsal/metrics.hpp"
#include "json.hpp"

namespace cdsal {

void CenterBiasModel::validate() const {
  const Covariance2& c = covariance;
  if (!std::isfinite(mean.x) || !std::isfinite(mean.y) || mean.x < 0.0 ||
      mean.x > 1.0 || mean.y < 0.0 || mean.y > 1.0) {
    throw Error(ErrorKind::kValidation, "center-bias mean must lie in [0,1]^2");
  }
  if (!std::isfinite(c.xx) || !std::isfinite(c.xy) || !std::isfinite(c.yy) ||
      !(c.xx > 0.0) || !(c.yy > 0.0) || !(c.determinant() > 0.0)) {
    throw Error(ErrorKind::kValidation,
                "center-bias covariance must be positive-definite");
  }
}

CenterBiasModel fit_center_bias(std::span<const GazeSample> samples) {
  std::vector<Point> normalized;
  for (const GazeSample& s : samples) {
    if (!(s.width > 0.0) || !(s.height > 0.0)) {
      throw Error(ErrorKind::kInvalidParameter, "gaze extent must be positive");
    }
    for (const Point& p : s.points) {
      normalized.push_back({p.x / s.width, p.y / s.height});
    }
  }
  if (normalized.size() < kMinCenterBiasSamples) {
    throw Error(ErrorKind::kFit, "center-bias fit needs at least " +
                                     std::to_string(kMinCenterBiasSamples) +
                                     " gaze points, got " +
                                     std::to_string(normalized.size()));
  }
  // Canonical summation order makes the fit bitwise independent of input order.
  std::sort(normalized.begin(), normalized.end(), [](const Point& a, const Point& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  const double n = static_cast<double>(normalized.size());
  double sx = 0.0;
  double sy = 0.0;
  for (const Point& p : normalized) {
    sx += p.x;
    sy += p.y;
  }
  CenterBiasModel model;
  model.mean = {sx / n, sy / n};
  double cxx = 0.0;
  double cxy = 0.0;
  double cyy = 0.0;
  for (const Point& p : normalized) {
    const double dx = p.x - model.mean.x;
    const double dy = p.y - model.mean.y;
    cxx += dx * dx;
    cxy += dx * dy;
    cyy += dy * dy;
  }
  model.covariance = {cxx / n, cxy / n, cyy / n};
  model.sample_count = normalized.size();
  const Covariance2& c = model.covariance;
  if (!(c.xx > 0.0) || !(c.yy > 0.0) || c.determinant() <= 1e-9 * c.xx * c.yy) {
    throw Error(ErrorKind::kFit,
                "singular gaze covariance (points coincide or are collinear)");
  }
  return model;
}

Grid evaluate_density(const CenterBiasModel& model, Dims dims) {
  model.validate();
  if (dims.width <= 0 || dims.height <= 0) {
    throw Error(ErrorKind::kDimension, "density needs a non-empty frame");
  }
  const Covariance2& c = model.covariance;
  const double det = c.determinant();
  const double ixx = c.yy / det;
  const double ixy = -c.xy / det;
  const double iyy = c.xx / det;
  Grid density(dims);
  // Exponents are shifted by their maximum (0 at the mean) before exp; the
  // constant factor cancels in the final normalization.
  long double total = 0.0L;
  for (int y = 0; y < dims.height; ++y) {
    const double v = pixel_center(y) / dims.height - model.mean.y;
    for (int x = 0; x < dims.width; ++x) {
      const double u = pixel_center(x) / dims.width - model.mean.x;
      const double q = ixx * u * u + 2.0 * ixy * u * v + iyy * v * v;
      const double value = std::exp(-0.5 * q);
      density(x, y) = value;
      total += value;
    }
  }
  if (!(total > 0.0L)) {
    throw Error(ErrorKind::kDegenerate, "center-bias density underflows on this frame");
  }
  const double inv = static_cast<double>(1.0L / total);
  for (double& v : density.values()) v *= inv;
  return density;
}

std::optional<Point> transform_standard_normal(const CenterBiasModel& model,
                                               Dims dims, double z1, double z2) {
  const double l11 = std::sqrt(model.covariance.xx);
  const double l21 = model.covariance.xy / l11;
  const double l22 = std::sqrt(std::max(0.0, model.covariance.yy - l21 * l21));
  const double u = model.mean.x + l11 * z1;
  const double v = model.mean.y + l21 * z1 + l22 * z2;
  const Point p{u * dims.width, v * dims.height};
  if (!(p.x >= 0.0 && p.x < dims.width && p.y >= 0.0 && p.y < dims.height)) {
    return std::nullopt;
  }
  return p;
}

void save_center_bias(const std::filesystem::path& path, const CenterBiasModel& model) {
  nlohmann::ordered_json node;
  node["mean"] = {model.mean.x, model.mean.y};
  node["covariance"] = {{model.covariance.xx, model.covariance.xy},
                        {model.covariance.xy, model.covariance.yy}};
  node["sample_count"] = model.sample_count;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kConfig, "cannot write " + path.string());
  out << node.dump(2) << '\n';
}

CenterBiasModel load_center_bias(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  nlohmann::json node;
  try {
    node = nlohmann::json::parse(in);
    CenterBiasModel model;
    const auto& mean = node.at("mean");
    const auto& cov = node.at("covariance");
    model.mean = {mean.at(0).get<double>(), mean.at(1).get<double>()};
    model.covariance = {cov.at(0).at(0).get<double>(), cov.at(0).at(1).get<double>(),
                        cov.at(1).at(1).get<double>()};
    if (cov.at(1).at(0).get<double>() != model.covariance.xy) {
      throw ParseError(path.string(), 0, "covariance must be symmetric");
    }
    model.sample_count = node.at("sample_count").get<std::size_t>();
    for (const auto& item : node.items()) {
      if (item.key() != "mean" && item.key() != "covariance" &&
          item.key() != "sample_count") {
        throw ParseError(path.string(), 0, "unknown key '" + item.key() + "'");
      }
    }
    model.validate();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, std::string("malformed center-bias model: ") + e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

namespace {

void check_density(const Grid& saliency, const Grid& density) {
  if (saliency.dims() != density.dims()) {
    throw Error(ErrorKind::kDimension, "saliency and density shapes differ");
  }
  if (saliency.size() < 2) {
    throw Error(ErrorKind::kDegenerate, "weighted normalization needs >= 2 pixels");
  }
  double total = 0.0;
  for (double f : density.values()) {
    if (!(f >= 0.0) || !std::isfinite(f)) {
      throw Error(ErrorKind::kInvalidParameter, "density must be finite and nonnegative");
    }
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidParameter, "density must sum to 1");
  }
}

}  // namespace

WeightedMoments weighted_moments(const Grid& saliency, const Grid& density,
                                 const WeightedNormalization& options) {
  check_density(saliency, density);
  const auto s = saliency.values();
  const auto f = density.values();
  const double n = static_cast<double>(s.size());
  const double weight_scale = options.scale == WeightScale::kUnitMean ? n : 1.0;

  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) sum += weight_scale * f[i] * s[i];
  WeightedMoments m;
  m.mean = sum / n;

  double ss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double w = weight_scale * f[i];
    switch (options.spread) {
      case SpreadForm::kWeightedProduct: ss += (w * s[i] - m.mean) * (w * s[i] - m.mean); break;
      case SpreadForm::kWeightedDeviation: ss += w * w * (s[i] - m.mean) * (s[i] - m.mean); break;
      case SpreadForm::kWeightedVariance: ss += w * (s[i] - m.mean) * (s[i] - m.mean); break;
    }
  }
  m.sd = std::sqrt(ss / (n - 1.0));
  return m;
}

Grid weighted_normalize(const Grid& saliency, const Grid& density,
                        const WeightedNormalization& options) {
  const WeightedMoments m = weighted_moments(saliency, density, options);
  if (!(m.sd > 0.0)) {
    throw Error(ErrorKind::kDegenerate, "weighted standard deviation is zero");
  }
  Grid out(saliency.dims());
  const auto s = saliency.values();
  auto o = out.values();
  for (std::size_t i = 0; i < s.size(); ++i) o[i] = (s[i] - m.mean) / m.sd;
  return out;
}

double nss_prime(const Grid& saliency, const Grid& density,
                 std::span<const Point> gaze, double radius_px,
                 const WeightedNormalization& options) {
  if (gaze.empty()) throw Error(ErrorKind::kDegenerate, "NSS' needs gaze points");
  const Grid normalized = weighted_normalize(saliency, density, options);
  const std::vector<double> values = gather_gaze_values(normalized, gaze, radius_px);
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace cdsal
