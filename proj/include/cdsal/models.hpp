#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdsal/core.hpp"
#include "cdsal/ingest.hpp"
#include "json.hpp"

namespace cdsal {

// Maps a block center (x, y) to (a*x - b*y + tx, b*x + a*y + ty).
struct GlobalMotion {
  double a = 1.0;
  double b = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Point apply(Point p) const { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }
  bool is_identity() const { return a == 1.0 && b == 0.0 && tx == 0.0 && ty == 0.0; }
};

struct GlobalMotionFit {
  GlobalMotion motion;
  bool fallback = false;   // fewer than 4 usable blocks: identity returned
  std::size_t inliers = 0;
};

// One block's center and its displacement, both in pixels.
struct BlockDisplacement {
  Point center;
  Point displacement;
};

inline constexpr std::size_t kMinGlobalMotionBlocks = 4;

// Least-squares similarity fit followed by two passes that drop blocks whose
// residual exceeds twice the median residual.
GlobalMotionFit fit_global_motion(std::span<const BlockDisplacement> field);
// Uses every block of a P-frame that carries a motion vector.
GlobalMotionFit fit_global_motion(const FrameFeatures& frame);

std::vector<BlockDisplacement> displacement_field(const FrameFeatures& frame);

// --- block-level model maps (grid_w x grid_h) --------------------------------

Grid mvmag_blocks(const FrameFeatures& frame);

struct PmesParams {
  int window_s = 3;      // spatial window side, blocks
  int window_t = 3;      // causal window, P-frames
  double epsilon_px = 0.5;
};
// `frames` is the whole stream; only P-frames at or before `t` are read.
Grid pmes_blocks(std::span<const FrameFeatures> frames, std::size_t t,
                 const PmesParams& params = {});

struct CsdctParams {
  int coefficients = 9;
  double decay_px = 64.0;
};
// Raw contrast, before per-frame normalization.
Grid csdct_blocks(const FrameFeatures& frame, const CsdctParams& params = {});

struct ObdlParams {
  int temporal_smooth = 3;
};
// Bits per 16x16-equivalent area, averaged over the P-frames among
// [t - temporal_smooth + 1, t].
Grid obdl_blocks(std::span<const FrameFeatures> frames, std::size_t t,
                 const ObdlParams& params = {});

// Residual motion magnitude after removing the fitted global motion, with
// residuals re-quantized to quarter-pel.
Grid gmc_residual_blocks(const FrameFeatures& frame);

// --- pixel-level benchmarks ----------------------------------------------------

// Centered blob, sigma 1 degree.
SaliencyMap model_gauss(Dims dims, const ViewingGeometry& geom, double map_scale = 1.0);

// Max-combined blobs of `sigma_px` at every point; all zeros without points.
SaliencyMap io_map(std::span<const Point> points, Dims dims, double sigma_px);

// --- registry -------------------------------------------------------------------

class Model {
 public:
  virtual ~Model() = default;
  virtual std::string_view id() const = 0;
  virtual bool covers(FrameType type) const = 0;
  // Same map for every frame of a sequence.
  virtual bool content_independent() const { return false; }
  // Throws kConfig when the sequence cannot be scored at all; returns
  // non-fatal warnings.
  virtual std::vector<std::string> check(const SequenceBundle& bundle) const;
  // Raw (unnormalized) nonnegative map for a covered frame.
  virtual SaliencyMap predict(const SequenceBundle& bundle, std::size_t t) const = 0;
};

const std::vector<std::string>& model_ids();
// `params` is the model's block of the manifest's model config (may be null).
// Throws kConfig for unknown ids, unknown keys or invalid values.
std::unique_ptr<Model> make_model(std::string_view id,
                                  const nlohmann::json& params = nullptr);

struct ModelOutput {
  std::string model_id;
  bool scores_i = false;
  bool scores_p = false;
  std::vector<std::optional<SaliencyMap>> maps;  // nullopt on unscored frames
  std::vector<std::string> warnings;
};

ModelOutput run_model(const Model& model, const SequenceBundle& bundle);

}  // namespace cdsal
