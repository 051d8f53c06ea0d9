#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "cdsal/core.hpp"

namespace cdsal {

struct Covariance2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  double determinant() const { return xx * yy - xy * xy; }
  friend bool operator==(const Covariance2&, const Covariance2&) = default;
};

// Dataset-level gaze prior: a 2D Gaussian over frame coordinates normalized
// to [0, 1]^2, so one fit serves every resolution.
struct CenterBiasModel {
  Point mean;
  Covariance2 covariance;
  std::size_t sample_count = 0;

  // Symmetric by construction; checks positive-definiteness and mean range.
  void validate() const;
  friend bool operator==(const CenterBiasModel&, const CenterBiasModel&) = default;
};

// Gaze of one sequence together with the extent used to normalize it.
struct GazeSample {
  std::vector<Point> points;
  double width = 0.0;
  double height = 0.0;
};

inline constexpr std::size_t kMinCenterBiasSamples = 100;

// Maximum-likelihood fit (sample mean, 1/n covariance) over all points after
// per-sequence normalization. Exactly invariant to point order. Throws kFit
// for fewer than kMinCenterBiasSamples points or a singular covariance.
CenterBiasModel fit_center_bias(std::span<const GazeSample> samples);

// Density at every pixel center of `dims`, rescaled so the map sums to 1.
Grid evaluate_density(const CenterBiasModel& model, Dims dims);

// Maps a pair of independent standard normals to a point of `dims` (map
// pixels, continuous) distributed as the model; nullopt outside the frame.
std::optional<Point> transform_standard_normal(const CenterBiasModel& model,
                                               Dims dims, double z1, double z2);

void save_center_bias(const std::filesystem::path& path, const CenterBiasModel& model);
CenterBiasModel load_center_bias(const std::filesystem::path& path);

// How the prior F enters the weighted normalization
//   mu~ = (1/N) sum w*S,  sigma~ = sqrt(1/(N-1) sum spread^2),
//   S'  = (S - mu~) / sigma~.
// The default (unit mean, weighted variance) is the F-weighted z-score.
enum class WeightScale {
  kUnitMean,  // w = N*F: uniform F reduces S' to the plain z-score
  kUnitSum,   // w = F as stored (sums to 1); S' grows with N
};
enum class SpreadForm {
  kWeightedProduct,    // (w*S - mu~)
  kWeightedDeviation,  // w*(S - mu~)
  kWeightedVariance,   // sqrt(w)*(S - mu~): the w-weighted variance of S
};

struct WeightedNormalization {
  WeightScale scale = WeightScale::kUnitMean;
  SpreadForm spread = SpreadForm::kWeightedVariance;
};

struct WeightedMoments {
  double mean = 0.0;
  double sd = 0.0;
};

WeightedMoments weighted_moments(const Grid& saliency, const Grid& density,
                                 const WeightedNormalization& options = {});

// Throws kDegenerate when sigma~ is zero.
Grid weighted_normalize(const Grid& saliency, const Grid& density,
                        const WeightedNormalization& options = {});

// Mean of the locally-maximal weighted-normalized saliency at the gaze points.
double nss_prime(const Grid& saliency, const Grid& density,
                 std::span<const Point> gaze, double radius_px,
                 const WeightedNormalization& options = {});

}  // namespace cdsal
