#include "cdsal/core.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

namespace cdsal {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidGeometry: return "invalid-geometry";
    case ErrorKind::kInvalidParameter: return "invalid-parameter";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kOutOfBounds: return "out-of-bounds";
    case ErrorKind::kSampling: return "sampling";
    case ErrorKind::kFit: return "fit";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kInternal: return "internal";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind) {}

namespace {

std::string describe_location(const std::string& file, std::size_t line,
                              const std::string& rule) {
  std::ostringstream out;
  out << file;
  if (line > 0) out << ":" << line;
  out << ": " << rule;
  return out.str();
}

}  // namespace

ParseError::ParseError(std::string file, std::size_t line,
                       const std::string& rule)
    : Error(ErrorKind::kParse, describe_location(file, line, rule)),
      file_(std::move(file)),
      line_(line) {}

void ViewingGeometry::validate() const {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(screen_w_px) || !positive(screen_h_px) ||
      !positive(screen_diagonal_in) || !positive(viewing_distance_cm) ||
      !positive(display_w_px) || !positive(display_h_px)) {
    throw Error(ErrorKind::kInvalidGeometry,
                "all viewing-geometry fields must be strictly positive");
  }
  if (display_w_px > screen_w_px || display_h_px > screen_h_px) {
    throw Error(ErrorKind::kInvalidGeometry,
                "display region exceeds the screen resolution");
  }
}

double pixels_per_degree(const ViewingGeometry& geom) {
  geom.validate();
  constexpr double kCmPerInch = 2.54;
  const double diagonal_px = std::hypot(geom.screen_w_px, geom.screen_h_px);
  const double pitch_cm = geom.screen_diagonal_in * kCmPerInch / diagonal_px;
  const double half_degree = 0.5 * std::numbers::pi / 180.0;
  return 2.0 * geom.viewing_distance_cm * std::tan(half_degree) / pitch_cm;
}

double degrees_to_map_pixels(const ViewingGeometry& geom, double degrees,
                             double map_scale) {
  if (!(map_scale > 0.0) || !std::isfinite(map_scale)) {
    throw Error(ErrorKind::kInvalidParameter, "map scale must be positive");
  }
  return degrees * pixels_per_degree(geom) * map_scale;
}

Grid::Grid(Dims dims, double fill) : dims_(dims) {
  if (dims.width < 0 || dims.height < 0) {
    throw Error(ErrorKind::kDimension, "negative grid dimensions");
  }
  values_.assign(dims.pixel_count(), fill);
}

Grid::Grid(Dims dims, std::vector<double> values)
    : dims_(dims), values_(std::move(values)) {
  if (dims.width < 0 || dims.height < 0 ||
      values_.size() != dims.pixel_count()) {
    throw Error(ErrorKind::kDimension,
                "value count does not match width * height");
  }
}

SaliencyMap::SaliencyMap(Grid grid) : grid_(std::move(grid)) {
  for (double v : grid_.values()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorKind::kValidation,
                  "saliency values must be finite and nonnegative");
    }
  }
}

SaliencyMap SaliencyMap::zeros(Dims dims) { return SaliencyMap(Grid(dims)); }

GroundTruthMap::GroundTruthMap(Grid grid) : grid_(std::move(grid)) {
  for (double v : grid_.values()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorKind::kValidation,
                  "ground-truth values must be finite and nonnegative");
    }
  }
}

double GroundTruthMap::total() const {
  double sum = 0.0;
  for (double v : grid_.values()) sum += v;
  return sum;
}

std::string_view to_string(FrameType type) {
  return type == FrameType::kI ? "I" : "P";
}

bool FrameFeatures::covers(Dims frame) const {
  const auto axis_ok = [this](int blocks, int extent) {
    return static_cast<long>(blocks) * block_size >= extent &&
           extent > static_cast<long>(blocks - 1) * block_size;
  };
  return axis_ok(grid_w, frame.width) && axis_ok(grid_h, frame.height);
}

void FrameFeatures::validate() const {
  const auto fail = [this](const std::string& what) {
    throw Error(ErrorKind::kValidation,
                "frame " + std::to_string(frame) + ": " + what);
  };
  if (frame < 0) fail("negative frame index");
  if (block_size != 4 && block_size != 8 && block_size != 16) {
    fail("block_size must be 4, 8 or 16");
  }
  if (grid_w <= 0 || grid_h <= 0) fail("grid dimensions must be positive");
  if (blocks.size() != static_cast<std::size_t>(grid_w) * grid_h) {
    fail("block count does not match grid_w * grid_h");
  }
  for (const BlockRecord& b : blocks) {
    if (b.bits < 0) fail("negative bit count");
    if (type == FrameType::kI && b.mv) fail("I-frame carries a motion vector");
    if (type == FrameType::kP && !b.mv) fail("P-frame block lacks a motion vector");
  }
}

std::string_view to_string(Viewing viewing) {
  return viewing == Viewing::kPrimary ? "primary" : "counterpart";
}

std::optional<Viewing> parse_viewing(std::string_view text) {
  if (text == "primary") return Viewing::kPrimary;
  if (text == "counterpart") return Viewing::kCounterpart;
  return std::nullopt;
}

namespace {

// exp(-(i + 0.5 - c)^2 / 2 sigma^2) for every pixel index along one axis.
std::vector<double> axis_profile(int extent, double center, double sigma) {
  std::vector<double> profile(static_cast<std::size_t>(extent));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int i = 0; i < extent; ++i) {
    const double d = pixel_center(i) - center;
    profile[static_cast<std::size_t>(i)] = std::exp(-d * d * inv);
  }
  return profile;
}

}  // namespace

SaliencyMap gaussian_blob(Dims dims, Point center, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::kInvalidParameter, "blob sigma must be positive");
  }
  Grid grid(dims);
  const std::vector<double> gx = axis_profile(dims.width, center.x, sigma);
  const std::vector<double> gy = axis_profile(dims.height, center.y, sigma);
  const double cutoff = 16.0 * sigma * sigma;
  for (int y = 0; y < dims.height; ++y) {
    const double dy = pixel_center(y) - center.y;
    if (dy * dy > cutoff) continue;
    for (int x = 0; x < dims.width; ++x) {
      const double dx = pixel_center(x) - center.x;
      if (dx * dx + dy * dy <= cutoff) grid(x, y) = gx[x] * gy[y];
    }
  }
  return SaliencyMap(std::move(grid));
}

Grid gaussian_smooth(const Grid& input, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::kInvalidParameter, "smoothing sigma must be positive");
  }
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k) {
    taps[static_cast<std::size_t>(k + radius)] =
        std::exp(-static_cast<double>(k) * k / (2.0 * sigma * sigma));
  }
  const int w = input.width();
  const int h = input.height();

  // Horizontal pass, then vertical; each renormalized by the in-frame taps.
  Grid horizontal(input.dims());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      double mass = 0.0;
      const int lo = std::max(-radius, -x);
      const int hi = std::min(radius, w - 1 - x);
      for (int k = lo; k <= hi; ++k) {
        const double t = taps[static_cast<std::size_t>(k + radius)];
        acc += t * input(x + k, y);
        mass += t;
      }
      horizontal(x, y) = acc / mass;
    }
  }
  Grid output(input.dims());
  std::vector<double> acc(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    std::fill(acc.begin(), acc.end(), 0.0);
    double mass = 0.0;
    const int lo = std::max(-radius, -y);
    const int hi = std::min(radius, h - 1 - y);
    for (int k = lo; k <= hi; ++k) {
      const double t = taps[static_cast<std::size_t>(k + radius)];
      mass += t;
      for (int x = 0; x < w; ++x) acc[x] += t * horizontal(x, y + k);
    }
    for (int x = 0; x < w; ++x) output(x, y) = acc[x] / mass;
  }
  return output;
}

SaliencyMap upsample_block_map(const Grid& block_values, int block_size,
                               Dims out, double smooth_sigma) {
  if (block_size <= 0) {
    throw Error(ErrorKind::kInvalidParameter, "block size must be positive");
  }
  if (smooth_sigma < 0.0 || !std::isfinite(smooth_sigma)) {
    throw Error(ErrorKind::kInvalidParameter,
                "smoothing sigma must be nonnegative");
  }
  const auto axis_ok = [block_size](int blocks, int extent) {
    return extent > 0 && static_cast<long>(blocks) * block_size >= extent &&
           extent > static_cast<long>(blocks - 1) * block_size;
  };
  if (!axis_ok(block_values.width(), out.width) ||
      !axis_ok(block_values.height(), out.height)) {
    throw Error(ErrorKind::kDimension,
                "block grid does not cover the output frame");
  }
  Grid pixels(out);
  for (int y = 0; y < out.height; ++y) {
    const int by = y / block_size;
    for (int x = 0; x < out.width; ++x) {
      pixels(x, y) = block_values(x / block_size, by);
    }
  }
  if (smooth_sigma > 0.0) pixels = gaussian_smooth(pixels, smooth_sigma);
  return SaliencyMap(std::move(pixels));
}

Grid minmax_normalize(const Grid& input) {
  Grid output(input.dims());
  if (input.size() == 0) return output;
  const auto [lo_it, hi_it] =
      std::minmax_element(input.values().begin(), input.values().end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0.0)) return output;
  auto src = input.values();
  auto dst = output.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - lo) / range;
  return output;
}

SaliencyMap minmax_normalize(const SaliencyMap& map) {
  return SaliencyMap(minmax_normalize(map.grid()));
}

}  // namespace cdsal
