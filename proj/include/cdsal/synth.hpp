#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cdsal/core.hpp"
#include "cdsal/ingest.hpp"
#include "json.hpp"

namespace cdsal {

enum class BackgroundMotion { kNone, kPan, kZoom };
enum class CounterpartMode { kTwin, kIndependent };

struct SynthSpec {
  std::string id = "synth";
  std::uint64_t seed = 1;

  // Video (= saliency map) resolution and coding structure.
  int width = 352;
  int height = 288;
  int frame_count = 300;
  int block_size = 8;
  int gop = 12;  // I-frame period

  // Shown at display = video / gaze_to_map_scale on this screen.
  ViewingGeometry geometry{1280, 1024, 19.0, 80.0, 704, 576};
  double gaze_to_map_scale = 0.5;

  // Planted disk, video pixels: center(t) = center + velocity*t + orbit.
  Point center{176.0, 144.0};
  Point velocity{0.0, 0.0};
  double orbit_radius = 0.0;
  double orbit_period = 60.0;  // frames
  double radius = 24.0;
  double contrast = 1.0;

  BackgroundMotion background = BackgroundMotion::kNone;
  Point pan{0.0, 0.0};     // px / frame
  double zoom_rate = 0.0;  // relative scale change / frame
  int mv_jitter_qpel = 1;

  // Observers: with probability w a gaze sample lands on the planted disk,
  // otherwise it is drawn from the center-bias Gaussian (normalized frame
  // coordinates).
  int observers = 15;
  double w = 0.5;
  double fixation_spread = 1.0;  // object fixations fill this fraction of the radius
  Point bias_mean{0.5, 0.5};
  double bias_sd_x = 0.12;
  double bias_sd_y = 0.12;
  double bias_rho = 0.0;
  double noise_deg = 0.0;
  CounterpartMode counterpart = CounterpartMode::kTwin;
  double counterpart_noise_deg = 0.3;

  // Throws kConfig.
  void validate() const;
  // Planted disk center at frame t, video pixels.
  Point planted_center(int t) const;
  // Block whose center lies in the planted disk (or contains its center).
  bool planted_block(int t, int bx, int by) const;
  Dims dims() const { return {width, height}; }
};

// Fields absent from `node` keep the defaults of `base`; unknown keys throw.
SynthSpec parse_synth_spec(const nlohmann::json& node, const SynthSpec& base = {});
// A spec file is either one spec object or {"defaults": {...}, "sequences": [...]}.
std::vector<SynthSpec> load_synth_specs(const std::filesystem::path& path);

SequenceBundle generate(const SynthSpec& spec);

// Writes <id>.featjsonl and <id>_gaze.csv per sequence plus manifest.json;
// returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const std::vector<SequenceBundle>& bundles,
                                    const nlohmann::json& model_config = nlohmann::json::object());

// --- reference oracles --------------------------------------------------------

// (wins + ties / 2) / (|P| |N|) by exhaustive comparison.
double oracle_auc(std::span<const double> positives, std::span<const double> negatives);

struct Impulse {
  Point position;
  double weight = 1.0;
};

struct Kernel {
  std::function<double(double dx, double dy)> value;  // offset pixel - impulse
  double reach = 0.0;  // value is 0 when |dx| or |dy| exceeds reach
};

// out(x, y) = sum over impulses of weight * kernel(center(x,y) - position).
Grid oracle_convolve(std::span<const Impulse> impulses, const Kernel& kernel, Dims dims);

}  // namespace cdsal
