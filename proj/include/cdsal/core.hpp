#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cdsal {

enum class ErrorKind {
  kInvalidGeometry,
  kInvalidParameter,
  kDimension,
  kParse,
  kValidation,
  kDegenerate,
  kOutOfBounds,
  kSampling,
  kFit,
  kConfig,
  kInternal,
};

std::string_view to_string(ErrorKind kind);

// All toolkit failures are reported through this type; `kind()` tells the
// caller which contract was broken.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Structured ingest failure: names the file, the 1-based line (0 when the
// failure is not tied to a line) and the violated rule.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& rule);
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

struct Dims {
  int width = 0;
  int height = 0;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

// Pixel (i, j) covers [i, i+1) x [j, j+1); its center sits at (i+0.5, j+0.5).
// Continuous coordinates are only rounded at lookup time.
inline double pixel_center(int index) { return index + 0.5; }
inline int pixel_index(double coordinate) {
  return static_cast<int>(std::floor(coordinate));
}

struct ViewingGeometry {
  double screen_w_px = 0.0;
  double screen_h_px = 0.0;
  double screen_diagonal_in = 0.0;
  double viewing_distance_cm = 0.0;
  double display_w_px = 0.0;
  double display_h_px = 0.0;

  // Throws kInvalidGeometry.
  void validate() const;
  friend bool operator==(const ViewingGeometry&,
                         const ViewingGeometry&) = default;
};

// Screen pixels spanned by one degree of visual angle at the viewing distance.
double pixels_per_degree(const ViewingGeometry& geom);

// Degrees of visual angle -> saliency-map pixels. `map_scale` converts display
// pixels to map pixels (0.5 when the video was shown at double size).
double degrees_to_map_pixels(const ViewingGeometry& geom, double degrees,
                             double map_scale = 1.0);

// Dense row-major scalar field with no sign constraint. Normalized maps and
// intermediate results live here; SaliencyMap and GroundTruthMap wrap it with
// their own invariants.
class Grid {
 public:
  Grid() = default;
  explicit Grid(Dims dims, double fill = 0.0);
  Grid(Dims dims, std::vector<double> values);

  Dims dims() const { return dims_; }
  int width() const { return dims_.width; }
  int height() const { return dims_.height; }
  std::size_t size() const { return values_.size(); }

  double operator()(int x, int y) const { return values_[index(x, y)]; }
  double& operator()(int x, int y) { return values_[index(x, y)]; }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < dims_.width && y < dims_.height;
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(dims_.width) +
           static_cast<std::size_t>(x);
  }

  Dims dims_;
  std::vector<double> values_;
};

// Nonnegative, finite saliency over a pixel grid.
class SaliencyMap {
 public:
  SaliencyMap() = default;
  // Throws kValidation if any value is negative or non-finite.
  explicit SaliencyMap(Grid grid);
  static SaliencyMap zeros(Dims dims);

  const Grid& grid() const { return grid_; }
  Dims dims() const { return grid_.dims(); }
  double operator()(int x, int y) const { return grid_(x, y); }

  friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;

 private:
  Grid grid_;
};

// Gaze impulses convolved with a Gaussian (sum-combined). Deliberately a
// separate type from SaliencyMap: the IO model max-combines blobs instead.
class GroundTruthMap {
 public:
  GroundTruthMap() = default;
  explicit GroundTruthMap(Grid grid);

  const Grid& grid() const { return grid_; }
  Dims dims() const { return grid_.dims(); }
  double total() const;

 private:
  Grid grid_;
};

enum class FrameType { kI, kP };
std::string_view to_string(FrameType type);

// Quarter-pel displacement.
struct MotionVector {
  int dx = 0;
  int dy = 0;

  double magnitude_px() const {
    return std::sqrt(static_cast<double>(dx) * dx +
                     static_cast<double>(dy) * dy) /
           4.0;
  }
  friend bool operator==(const MotionVector&, const MotionVector&) = default;
};

struct BlockRecord {
  std::optional<MotionVector> mv;  // P-frames only
  std::vector<int> dct;            // zig-zag quantized levels
  std::int64_t bits = 0;
  friend bool operator==(const BlockRecord&, const BlockRecord&) = default;
};

struct FrameFeatures {
  int frame = 0;
  FrameType type = FrameType::kP;
  int block_size = 8;
  int grid_w = 0;
  int grid_h = 0;
  std::vector<BlockRecord> blocks;  // row-major, grid_w * grid_h

  const BlockRecord& block(int bx, int by) const {
    return blocks[static_cast<std::size_t>(by) * grid_w + bx];
  }
  BlockRecord& block(int bx, int by) {
    return blocks[static_cast<std::size_t>(by) * grid_w + bx];
  }

  // Grid covers the frame with less than one block of slack per axis.
  bool covers(Dims frame) const;

  // Intrinsic invariants (block size, counts, I-frames carry no MVs, P-frames
  // carry one per block, bits >= 0). Throws kValidation naming the frame.
  void validate() const;

  friend bool operator==(const FrameFeatures&, const FrameFeatures&) = default;
};

enum class Viewing { kPrimary, kCounterpart };
std::string_view to_string(Viewing viewing);
std::optional<Viewing> parse_viewing(std::string_view text);

struct GazePoint {
  double x = 0.0;  // display pixels
  double y = 0.0;
  int frame = 0;
  std::string observer;
  Viewing viewing = Viewing::kPrimary;
  friend bool operator==(const GazePoint&, const GazePoint&) = default;
};

// Isotropic Gaussian evaluated at pixel centers, exp(-d^2 / 2 sigma^2), zero
// beyond 4 sigma. Peak is 1 when `center` lies on a pixel center.
SaliencyMap gaussian_blob(Dims dims, Point center, double sigma);

// Separable Gaussian smoothing (taps to ceil(4 sigma)), renormalized by the
// in-frame kernel mass so constants are preserved at the borders.
Grid gaussian_smooth(const Grid& input, double sigma);

// Nearest-block replication to `out`, then gaussian_smooth (sigma 0 skips it).
SaliencyMap upsample_block_map(const Grid& block_values, int block_size,
                               Dims out, double smooth_sigma);

// Affine rescale to [0, 1]; a constant input maps to all zeros.
Grid minmax_normalize(const Grid& input);
SaliencyMap minmax_normalize(const SaliencyMap& map);

}  // namespace cdsal
