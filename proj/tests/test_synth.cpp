#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cdsal/metrics.hpp"
#include "cdsal/models.hpp"
#include "cdsal/synth.hpp"
#include "doctest.h"

using namespace cdsal;
namespace fs = std::filesystem;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInternal;
}

SynthSpec small() {
  SynthSpec s;
  s.frame_count = 24;
  s.observers = 6;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("spec validation") {
  SynthSpec s = small();
  CHECK_NOTHROW(s.validate());
  s.w = 1.5;
  CHECK(kind_of([&] { s.validate(); }) == ErrorKind::kConfig);
  s = small();
  s.radius = 0.0;
  CHECK(kind_of([&] { s.validate(); }) == ErrorKind::kConfig);
  s = small();
  s.velocity = {10.0, 0.0};  // crosses the right edge before frame 24
  CHECK(kind_of([&] { generate(s); }) == ErrorKind::kConfig);
  s = small();
  s.width = 300;
  CHECK(kind_of([&] { s.validate(); }) == ErrorKind::kConfig);

  CHECK(kind_of([] { parse_synth_spec({{"colour", "red"}}); }) == ErrorKind::kConfig);
  const SynthSpec p = parse_synth_spec({{"id", "pan"}, {"background", "pan"}, {"pan", {2, 1}}, {"w", 0.25}});
  CHECK(p.id == "pan");
  CHECK(p.background == BackgroundMotion::kPan);
  CHECK(p.pan == Point{2, 1});
  CHECK(p.w == 0.25);
  CHECK(p.frame_count == SynthSpec{}.frame_count);
}

TEST_CASE("spec files with shared defaults") {
  const fs::path path = fs::temp_directory_path() / "cdsal_synth_specs.json";
  std::ofstream(path) << R"({"defaults": {"frame_count": 12, "observers": 3},
    "sequences": [{"id": "a"}, {"id": "b", "frame_count": 24}]})";
  const auto specs = load_synth_specs(path);
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].frame_count == 12);
  CHECK(specs[1].frame_count == 24);
  CHECK(specs[1].observers == 3);
  std::ofstream(path) << R"({"sequences": [{"id": "a"}, {"id": "a"}]})";
  CHECK(kind_of([&] { load_synth_specs(path); }) == ErrorKind::kConfig);
  fs::remove(path);
}

TEST_CASE("full-attention observers fixate the planted region") {
  SynthSpec s = small();
  s.w = 1.0;
  s.center = {120, 110};
  s.orbit_radius = 40;
  const SequenceBundle b = generate(s);
  CHECK(b.frame_count() == 24);
  for (int t = 0; t < s.frame_count; ++t) {
    const Point c = s.planted_center(t);
    const auto pts = b.map_gaze(t, Viewing::kPrimary);
    REQUIRE(pts.size() == 6);
    for (const Point& p : pts) REQUIRE(std::hypot(p.x - c.x, p.y - c.y) <= s.radius + 1e-9);
  }
}

TEST_CASE("bias-only observers follow the center-bias Gaussian") {
  SynthSpec s = small();
  s.w = 0.0;
  s.observers = 40;
  s.frame_count = 50;
  const SequenceBundle b = generate(s);
  double mx = 0.0, my = 0.0;
  int n = 0;
  for (const GazePoint& g : b.gaze.rows()) {
    if (g.viewing != Viewing::kPrimary) continue;
    mx += g.x / s.geometry.display_w_px;
    my += g.y / s.geometry.display_h_px;
    ++n;
  }
  mx /= n;
  my /= n;
  CHECK(std::abs(mx - 0.5) < 3 * s.bias_sd_x / std::sqrt(n));
  CHECK(std::abs(my - 0.5) < 3 * s.bias_sd_y / std::sqrt(n));
}

TEST_CASE("pan background: only planted blocks keep residual motion") {
  SynthSpec s = small();
  s.background = BackgroundMotion::kPan;
  s.pan = {2.0, 1.0};
  s.center = {200, 120};
  const SequenceBundle b = generate(s);
  int planted = 0;
  for (const FrameFeatures& f : b.frames) {
    if (f.type != FrameType::kP) continue;
    const GlobalMotionFit fit = fit_global_motion(f);
    REQUIRE_FALSE(fit.fallback);
    for (int by = 0; by < f.grid_h; ++by) {
      for (int bx = 0; bx < f.grid_w; ++bx) {
        const Point c{(bx + 0.5) * f.block_size, (by + 0.5) * f.block_size};
        const Point g = fit.motion.apply(c);
        const MotionVector mv = *f.block(bx, by).mv;
        const double r = std::hypot(mv.dx / 4.0 - (g.x - c.x), mv.dy / 4.0 - (g.y - c.y));
        const bool in = s.planted_block(f.frame, bx, by);
        planted += in;
        REQUIRE((r > 0.5) == in);
      }
    }
  }
  CHECK(planted > 0);
}

TEST_CASE("generation is deterministic and round-trips through ingest") {
  SynthSpec s = small();
  s.id = "det";
  s.orbit_radius = 30;
  const SequenceBundle a = generate(s);
  const SequenceBundle b = generate(s);
  CHECK(a.frames == b.frames);
  CHECK(a.gaze.rows() == b.gaze.rows());
  s.seed = 2;
  CHECK(generate(s).gaze.rows() != a.gaze.rows());

  const fs::path d1 = fs::temp_directory_path() / "cdsal_synth_rt1";
  const fs::path d2 = fs::temp_directory_path() / "cdsal_synth_rt2";
  const fs::path m1 = write_dataset(d1, {a});
  write_dataset(d2, {b});
  CHECK(slurp(d1 / "det.featjsonl") == slurp(d2 / "det.featjsonl"));
  CHECK(slurp(d1 / "det_gaze.csv") == slurp(d2 / "det_gaze.csv"));

  const auto loaded = load_bundles(m1);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].frames == a.frames);
  CHECK(loaded[0].gaze.rows() == a.gaze.rows());
  CHECK(loaded[0].map_dims == a.map_dims);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("oracles") {
  CHECK(oracle_auc(std::vector<double>{1}, std::vector<double>{0}) == 1.0);
  CHECK(oracle_auc(std::vector<double>{0.3}, std::vector<double>{0.3}) == 0.5);
  CHECK(oracle_auc(std::vector<double>{0.9, 0.4}, std::vector<double>{0.5, 0.1}) == 0.75);

  const Dims dims{60, 40};
  const Kernel box{[](double dx, double dy) { return std::abs(dx) <= 1 && std::abs(dy) <= 2 ? 1.0 + dx : 0.0; }, 2.0};
  const Grid none = oracle_convolve({}, box, dims);
  for (double v : none.values()) REQUIRE(v == 0.0);
  const std::vector<Impulse> one{{{10.5, 20.5}, 2.0}};
  const Grid g = oracle_convolve(one, box, dims);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) REQUIRE(g(x, y) == 2.0 * box.value(x - 10.0, y - 20.0));
  }

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ux(0, 60), uy(0, 40);
  std::vector<Point> gaze(10);
  std::vector<Impulse> impulses;
  for (Point& p : gaze) {
    p = {ux(rng), uy(rng)};
    impulses.push_back({{std::floor(p.x) + 0.5, std::floor(p.y) + 0.5}, 1.0});
  }
  const double sigma = 4.0;
  const Kernel gauss{[sigma](double dx, double dy) {
                       const double d2 = dx * dx + dy * dy;
                       return d2 <= 16 * sigma * sigma ? std::exp(-d2 / (2 * sigma * sigma)) : 0.0;
                     },
                     4 * sigma};
  const Grid want = oracle_convolve(impulses, gauss, dims);
  const GroundTruthMap got = build_ground_truth(gaze, dims, sigma);
  for (std::size_t i = 0; i < want.size(); ++i) {
    REQUIRE(std::abs(want.values()[i] - got.grid().values()[i]) < 1e-9);
  }
}
