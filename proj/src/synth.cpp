#include "cdsal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "cdsal/metrics.hpp"

namespace cdsal {

namespace {

constexpr int kCoefficients = 16;
constexpr int kBackgroundDc = 40;
constexpr int kTemplate[kCoefficients - 1] = {48, -40, 36, -30, 28, -24, 20, -18,
                                              16, -14, 12, -10, 8,  -6,  4};
constexpr double kBitsBase = 12.0;
constexpr double kBitsPerResidualPx = 8.0;
constexpr double kBitsPerAc = 0.5;

void fail(const std::string& what) { throw Error(ErrorKind::kConfig, "synth spec: " + what); }

BackgroundMotion parse_background(const std::string& s) {
  if (s == "none") return BackgroundMotion::kNone;
  if (s == "pan") return BackgroundMotion::kPan;
  if (s == "zoom") return BackgroundMotion::kZoom;
  fail("background must be none, pan or zoom");
  return BackgroundMotion::kNone;
}

CounterpartMode parse_counterpart(const std::string& s) {
  if (s == "twin") return CounterpartMode::kTwin;
  if (s == "independent") return CounterpartMode::kIndependent;
  fail("counterpart must be twin or independent");
  return CounterpartMode::kTwin;
}

Point read_point(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    fail(key + " must be [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

// Background displacement of the block centered at c, in pixels.
Point background_motion(const SynthSpec& s, Point c) {
  switch (s.background) {
    case BackgroundMotion::kNone: return {0.0, 0.0};
    case BackgroundMotion::kPan: return s.pan;
    case BackgroundMotion::kZoom:
      return {s.zoom_rate * (c.x - 0.5 * s.width), s.zoom_rate * (c.y - 0.5 * s.height)};
  }
  return {0.0, 0.0};
}

}  // namespace

void SynthSpec::validate() const {
  if (id.empty() || id.find_first_of(",/\\ ") != std::string::npos) {
    fail("id must be non-empty without commas, slashes or spaces");
  }
  if (width <= 0 || height <= 0) fail("dimensions must be positive");
  if (frame_count < 1) fail("frame_count must be >= 1");
  if (block_size < 1) fail("block_size must be >= 1");
  if (gop < 1) fail("gop must be >= 1");
  try {
    geometry.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  if (!(gaze_to_map_scale > 0.0)) fail("gaze_to_map_scale must be > 0");
  if (std::lround(geometry.display_w_px * gaze_to_map_scale) != width ||
      std::lround(geometry.display_h_px * gaze_to_map_scale) != height) {
    fail("display size times gaze_to_map_scale must equal the video size");
  }
  if (!(radius > 0.0)) fail("radius must be > 0");
  if (!(contrast >= 0.0)) fail("contrast must be >= 0");
  if (!(orbit_radius >= 0.0)) fail("orbit_radius must be >= 0");
  if (!(orbit_period > 0.0)) fail("orbit_period must be > 0");
  if (mv_jitter_qpel < 0) fail("mv_jitter_qpel must be >= 0");
  if (observers < 1) fail("observers must be >= 1");
  if (!(w >= 0.0 && w <= 1.0)) fail("w must lie in [0, 1]");
  if (!(fixation_spread >= 0.0 && fixation_spread <= 1.0)) {
    fail("fixation_spread must lie in [0, 1]");
  }
  if (!(bias_sd_x > 0.0) || !(bias_sd_y > 0.0)) fail("bias sd must be > 0");
  if (!(bias_rho > -1.0 && bias_rho < 1.0)) fail("bias_rho must lie in (-1, 1)");
  if (!(noise_deg >= 0.0) || !(counterpart_noise_deg >= 0.0)) fail("noise must be >= 0");
  for (int t = 0; t < frame_count; ++t) {
    const Point c = planted_center(t);
    if (c.x - radius < 0.0 || c.y - radius < 0.0 || c.x + radius > width ||
        c.y + radius > height) {
      fail("planted region leaves the frame at frame " + std::to_string(t));
    }
  }
}

Point SynthSpec::planted_center(int t) const {
  Point c{center.x + velocity.x * t, center.y + velocity.y * t};
  if (orbit_radius > 0.0) {
    const double phase = 2.0 * std::numbers::pi * t / orbit_period;
    c.x += orbit_radius * std::cos(phase);
    c.y += orbit_radius * std::sin(phase);
  }
  return c;
}

bool SynthSpec::planted_block(int t, int bx, int by) const {
  const Point c = planted_center(t);
  if (pixel_index(c.x) / block_size == bx && pixel_index(c.y) / block_size == by) return true;
  const double cx = (bx + 0.5) * block_size;
  const double cy = (by + 0.5) * block_size;
  return std::hypot(cx - c.x, cy - c.y) <= radius;
}

SynthSpec parse_synth_spec(const nlohmann::json& node, const SynthSpec& base) {
  if (!node.is_object()) fail("spec must be a JSON object");
  SynthSpec s = base;
  static const std::set<std::string> known = {
      "id", "seed", "width", "height", "frame_count", "block_size", "gop", "geometry",
      "gaze_to_map_scale", "center", "velocity", "orbit_radius", "orbit_period", "radius",
      "contrast", "background", "pan", "zoom_rate", "mv_jitter_qpel", "observers", "w",
      "fixation_spread",
      "bias_mean", "bias_sd", "bias_rho", "noise_deg", "counterpart",
      "counterpart_noise_deg"};
  for (const auto& item : node.items()) {
    if (!known.count(item.key())) fail("unknown key '" + item.key() + "'");
  }
  try {
    const auto get_int = [&](const char* key, int& out) {
      if (node.contains(key)) {
        if (!node[key].is_number_integer()) fail(std::string(key) + " must be an integer");
        out = node[key].get<int>();
      }
    };
    const auto get_real = [&](const char* key, double& out) {
      if (node.contains(key)) {
        if (!node[key].is_number()) fail(std::string(key) + " must be a number");
        out = node[key].get<double>();
      }
    };
    if (node.contains("id")) s.id = node["id"].get<std::string>();
    if (node.contains("seed")) s.seed = node["seed"].get<std::uint64_t>();
    get_int("width", s.width);
    get_int("height", s.height);
    get_int("frame_count", s.frame_count);
    get_int("block_size", s.block_size);
    get_int("gop", s.gop);
    if (node.contains("geometry")) {
      const auto& g = node["geometry"];
      static const std::set<std::string> gkeys = {"screen_w_px", "screen_h_px",
                                                  "screen_diagonal_in", "viewing_distance_cm",
                                                  "display_w_px", "display_h_px"};
      for (const auto& item : g.items()) {
        if (!gkeys.count(item.key())) fail("unknown geometry key '" + item.key() + "'");
      }
      s.geometry.screen_w_px = g.value("screen_w_px", s.geometry.screen_w_px);
      s.geometry.screen_h_px = g.value("screen_h_px", s.geometry.screen_h_px);
      s.geometry.screen_diagonal_in = g.value("screen_diagonal_in", s.geometry.screen_diagonal_in);
      s.geometry.viewing_distance_cm = g.value("viewing_distance_cm", s.geometry.viewing_distance_cm);
      s.geometry.display_w_px = g.value("display_w_px", s.geometry.display_w_px);
      s.geometry.display_h_px = g.value("display_h_px", s.geometry.display_h_px);
    }
    get_real("gaze_to_map_scale", s.gaze_to_map_scale);
    if (node.contains("center")) s.center = read_point(node["center"], "center");
    if (node.contains("velocity")) s.velocity = read_point(node["velocity"], "velocity");
    get_real("orbit_radius", s.orbit_radius);
    get_real("orbit_period", s.orbit_period);
    get_real("radius", s.radius);
    get_real("contrast", s.contrast);
    if (node.contains("background")) s.background = parse_background(node["background"].get<std::string>());
    if (node.contains("pan")) s.pan = read_point(node["pan"], "pan");
    get_real("zoom_rate", s.zoom_rate);
    get_int("mv_jitter_qpel", s.mv_jitter_qpel);
    get_int("observers", s.observers);
    get_real("w", s.w);
    get_real("fixation_spread", s.fixation_spread);
    if (node.contains("bias_mean")) s.bias_mean = read_point(node["bias_mean"], "bias_mean");
    if (node.contains("bias_sd")) {
      const Point sd = read_point(node["bias_sd"], "bias_sd");
      s.bias_sd_x = sd.x;
      s.bias_sd_y = sd.y;
    }
    get_real("bias_rho", s.bias_rho);
    get_real("noise_deg", s.noise_deg);
    if (node.contains("counterpart")) s.counterpart = parse_counterpart(node["counterpart"].get<std::string>());
    get_real("counterpart_noise_deg", s.counterpart_noise_deg);
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
  s.validate();
  return s;
}

std::vector<SynthSpec> load_synth_specs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kConfig, "cannot open synth spec " + path.string());
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  std::vector<SynthSpec> specs;
  if (root.is_object() && root.contains("sequences")) {
    for (const auto& item : root.items()) {
      if (item.key() != "defaults" && item.key() != "sequences") {
        fail("unknown top-level key '" + item.key() + "'");
      }
    }
    const nlohmann::json defaults = root.value("defaults", nlohmann::json::object());
    if (!defaults.is_object()) fail("defaults must be an object");
    if (!root["sequences"].is_array() || root["sequences"].empty()) {
      fail("sequences must be a non-empty array");
    }
    std::set<std::string> ids;
    for (const auto& entry : root["sequences"]) {
      if (!entry.is_object()) fail("sequence entries must be objects");
      nlohmann::json merged = defaults;
      merged.update(entry);
      specs.push_back(parse_synth_spec(merged));
      if (!ids.insert(specs.back().id).second) fail("duplicate id '" + specs.back().id + "'");
    }
  } else {
    specs.push_back(parse_synth_spec(root));
  }
  return specs;
}

SequenceBundle generate(const SynthSpec& spec) {
  spec.validate();
  SequenceBundle bundle;
  bundle.sequence_id = spec.id;
  bundle.geometry = spec.geometry;
  bundle.gaze_to_map_scale = spec.gaze_to_map_scale;
  bundle.map_dims = spec.dims();

  const int gw = (spec.width + spec.block_size - 1) / spec.block_size;
  const int gh = (spec.height + spec.block_size - 1) / spec.block_size;

  std::mt19937_64 feature_rng(mix_seed(spec.seed, hash_string("features")));
  std::uniform_int_distribution<int> jitter(-spec.mv_jitter_qpel, spec.mv_jitter_qpel);
  std::uniform_int_distribution<int> ac_noise(-2, 2);

  for (int t = 0; t < spec.frame_count; ++t) {
    FrameFeatures f;
    f.frame = t;
    f.type = t % spec.gop == 0 ? FrameType::kI : FrameType::kP;
    f.block_size = spec.block_size;
    f.grid_w = gw;
    f.grid_h = gh;
    f.blocks.resize(static_cast<std::size_t>(gw) * gh);
    const Point now = spec.planted_center(t);
    const Point before = spec.planted_center(std::max(0, t - 1));
    const Point object_motion{now.x - before.x, now.y - before.y};
    for (int by = 0; by < gh; ++by) {
      for (int bx = 0; bx < gw; ++bx) {
        BlockRecord& b = f.block(bx, by);
        const bool planted = spec.planted_block(t, bx, by);
        const Point c{(bx + 0.5) * spec.block_size, (by + 0.5) * spec.block_size};
        const Point bg = background_motion(spec, c);

        b.dct.resize(kCoefficients);
        b.dct[0] = kBackgroundDc;
        long ac_energy = 0;
        for (int k = 1; k < kCoefficients; ++k) {
          int level = ac_noise(feature_rng);
          if (planted) level += static_cast<int>(std::lround(kTemplate[k - 1] * spec.contrast));
          b.dct[static_cast<std::size_t>(k)] = level;
          ac_energy += std::abs(level);
        }
        double bits = kBitsBase + kBitsPerAc * static_cast<double>(ac_energy);
        if (f.type == FrameType::kP) {
          const Point motion = planted ? object_motion : bg;
          MotionVector mv{static_cast<int>(std::lround(4.0 * motion.x)) + jitter(feature_rng),
                          static_cast<int>(std::lround(4.0 * motion.y)) + jitter(feature_rng)};
          b.mv = mv;
          bits += kBitsPerResidualPx *
                  std::hypot(mv.dx / 4.0 - bg.x, mv.dy / 4.0 - bg.y);
        }
        b.bits = std::llround(bits);
      }
    }
    bundle.frames.push_back(std::move(f));
  }

  // Observers, in display pixels.
  std::mt19937_64 gaze_rng(mix_seed(spec.seed, hash_string("gaze")));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double ppd = pixels_per_degree(spec.geometry);
  const double dw = spec.geometry.display_w_px;
  const double dh = spec.geometry.display_h_px;
  const double to_display = 1.0 / spec.gaze_to_map_scale;
  const double l21 = spec.bias_rho * spec.bias_sd_y;
  const double l22 = spec.bias_sd_y * std::sqrt(1.0 - spec.bias_rho * spec.bias_rho);
  const auto clamp_display = [&](Point p) {
    p.x = std::clamp(p.x, 0.0, std::nextafter(dw, 0.0));
    p.y = std::clamp(p.y, 0.0, std::nextafter(dh, 0.0));
    return p;
  };
  const auto observe = [&](int t) {
    Point p;
    if (unit(gaze_rng) < spec.w) {
      const Point c = spec.planted_center(t);
      const double r = spec.fixation_spread * spec.radius * std::sqrt(unit(gaze_rng));
      const double theta = 2.0 * std::numbers::pi * unit(gaze_rng);
      p = {(c.x + r * std::cos(theta)) * to_display, (c.y + r * std::sin(theta)) * to_display};
    } else {
      while (true) {
        const double z1 = normal(gaze_rng);
        const double z2 = normal(gaze_rng);
        const double u = spec.bias_mean.x + spec.bias_sd_x * z1;
        const double v = spec.bias_mean.y + l21 * z1 + l22 * z2;
        if (u >= 0.0 && u < 1.0 && v >= 0.0 && v < 1.0) {
          p = {u * dw, v * dh};
          break;
        }
      }
    }
    if (spec.noise_deg > 0.0) {
      p.x += normal(gaze_rng) * spec.noise_deg * ppd;
      p.y += normal(gaze_rng) * spec.noise_deg * ppd;
    }
    return clamp_display(p);
  };

  bundle.gaze = GazeTable(spec.id);
  for (int o = 0; o < spec.observers; ++o) {
    char name[16];
    std::snprintf(name, sizeof(name), "o%02d", o);
    for (int t = 0; t < spec.frame_count; ++t) {
      const Point primary = observe(t);
      Point second;
      if (spec.counterpart == CounterpartMode::kTwin) {
        second = {primary.x + normal(gaze_rng) * spec.counterpart_noise_deg * ppd,
                  primary.y + normal(gaze_rng) * spec.counterpart_noise_deg * ppd};
        second = clamp_display(second);
      } else {
        second = observe(t);
      }
      bundle.gaze.add({primary.x, primary.y, t, name, Viewing::kPrimary});
      bundle.gaze.add({second.x, second.y, t, name, Viewing::kCounterpart});
    }
  }
  return bundle;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const std::vector<SequenceBundle>& bundles,
                                    const nlohmann::json& model_config) {
  std::filesystem::create_directories(dir);
  Manifest manifest;
  manifest.model_config = model_config;
  for (const SequenceBundle& b : bundles) {
    ManifestEntry e;
    e.id = b.sequence_id;
    e.features = dir / (b.sequence_id + ".featjsonl");
    e.gaze = dir / (b.sequence_id + "_gaze.csv");
    e.geometry = b.geometry;
    e.gaze_to_map_scale = b.gaze_to_map_scale;
    e.frame_count = b.frame_count();
    write_features(e.features, b.frames);
    write_gaze(e.gaze, b.gaze);
    manifest.sequences.push_back(std::move(e));
  }
  const std::filesystem::path path = dir / "manifest.json";
  write_manifest(path, manifest);
  return path;
}

double oracle_auc(std::span<const double> positives, std::span<const double> negatives) {
  std::uint64_t wins = 0;
  std::uint64_t ties = 0;
  for (double p : positives) {
    for (double n : negatives) {
      if (p > n) {
        ++wins;
      } else if (p == n) {
        ++ties;
      }
    }
  }
  const double pairs = static_cast<double>(positives.size()) * static_cast<double>(negatives.size());
  return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) / pairs;
}

Grid oracle_convolve(std::span<const Impulse> impulses, const Kernel& kernel, Dims dims) {
  Grid out(dims);
  for (const Impulse& imp : impulses) {
    const int y0 = std::max(0, static_cast<int>(std::floor(imp.position.y - kernel.reach)) - 1);
    const int y1 = std::min(dims.height - 1, static_cast<int>(std::ceil(imp.position.y + kernel.reach)));
    const int x0 = std::max(0, static_cast<int>(std::floor(imp.position.x - kernel.reach)) - 1);
    const int x1 = std::min(dims.width - 1, static_cast<int>(std::ceil(imp.position.x + kernel.reach)));
    for (int y = y0; y <= y1; ++y) {
      const double dy = pixel_center(y) - imp.position.y;
      if (std::abs(dy) > kernel.reach) continue;
      for (int x = x0; x <= x1; ++x) {
        const double dx = pixel_center(x) - imp.position.x;
        if (std::abs(dx) > kernel.reach) continue;
        out(x, y) += imp.weight * kernel.value(dx, dy);
      }
    }
  }
  return out;
}

}  // namespace cdsal
