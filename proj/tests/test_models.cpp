#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cdsal/models.hpp"
#include "doctest.h"

using namespace cdsal;

namespace {

FrameFeatures p_frame(int gw, int gh, int index = 0, int block = 8) {
  FrameFeatures f;
  f.frame = index;
  f.type = FrameType::kP;
  f.block_size = block;
  f.grid_w = gw;
  f.grid_h = gh;
  f.blocks.assign(static_cast<std::size_t>(gw) * gh, BlockRecord{MotionVector{0, 0}, {}, 0});
  return f;
}

FrameFeatures i_frame(int gw, int gh, int index = 0) {
  FrameFeatures f = p_frame(gw, gh, index);
  f.type = FrameType::kI;
  for (auto& b : f.blocks) b.mv.reset();
  return f;
}

std::pair<int, int> argmax(const Grid& g) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (g.values()[i] > g.values()[best]) best = i;
  }
  return {static_cast<int>(best % g.width()), static_cast<int>(best / g.width())};
}

bool all_zero(const Grid& g) {
  return std::all_of(g.values().begin(), g.values().end(), [](double v) { return v == 0.0; });
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInternal;
}

const ViewingGeometry kSfu{1280, 1024, 19.0, 80.0, 704, 576};

}  // namespace

TEST_CASE("gauss benchmark") {
  const Dims dims{352, 288};
  const SaliencyMap m = model_gauss(dims, kSfu, 1.0);
  CHECK(argmax(m.grid()) == std::pair{176, 144});
  CHECK(m(176, 144) == 1.0);
  // sigma = 1 degree = 47.40 px at map scale 1.
  const double ratio = m(176, 144) / m(176 + 47, 144);
  const double sigma = std::sqrt(47.0 * 47.0 / (2.0 * std::log(ratio)));
  CHECK(sigma == doctest::Approx(47.40).epsilon(1e-3));

  auto model = make_model("gauss");
  CHECK(model->content_independent());
  SequenceBundle b;
  b.geometry = kSfu;
  b.gaze_to_map_scale = 0.5;
  b.map_dims = dims;
  b.frames = {i_frame(44, 36, 0), p_frame(44, 36, 1)};
  CHECK(model->predict(b, 0) == model->predict(b, 1));
}

TEST_CASE("io benchmark max-combines blobs") {
  const Dims dims{200, 100};
  const double sigma = 6.0;
  const std::vector<Point> one{{50.5, 40.5}};
  CHECK(io_map(one, dims, sigma) == gaussian_blob(dims, one[0], sigma));
  const std::vector<Point> twice{{50.5, 40.5}, {50.5, 40.5}};
  CHECK(io_map(twice, dims, sigma) == io_map(one, dims, sigma));

  const std::vector<Point> apart{{40.5, 50.5}, {100.5, 50.5}};
  const SaliencyMap m = io_map(apart, dims, sigma);
  for (const Point& p : apart) {
    const SaliencyMap single = gaussian_blob(dims, p, sigma);
    for (int y = 0; y < dims.height; ++y) {
      for (int x = 0; x < dims.width; ++x) {
        if (std::abs(x + 0.5 - p.x) <= 4 * sigma) REQUIRE(std::abs(m(x, y) - single(x, y)) < 1e-9);
      }
    }
    const int px = static_cast<int>(p.x);
    const int py = static_cast<int>(p.y);
    CHECK(m(px, py) > m(px + 1, py));
    CHECK(m(px, py) > m(px - 1, py));
    CHECK(m(px, py) > m(px, py + 1));
  }
  CHECK(all_zero(io_map({}, dims, sigma).grid()));

  SequenceBundle b;
  b.sequence_id = "s";
  b.geometry = kSfu;
  b.map_dims = {64, 64};
  b.frames = {p_frame(8, 8)};
  b.gaze = GazeTable("s");
  b.gaze.add({10, 10, 0, "o", Viewing::kPrimary});
  CHECK(kind_of([&] { make_model("io")->check(b); }) == ErrorKind::kConfig);
  b.gaze.add({20.5, 20.5, 0, "o", Viewing::kCounterpart});
  CHECK_NOTHROW(make_model("io")->check(b));
  const SaliencyMap p = make_model("io")->predict(b, 0);
  CHECK(argmax(p.grid()) == std::pair{20, 20});
}

TEST_CASE("mvmag") {
  FrameFeatures f = p_frame(5, 4);
  CHECK(all_zero(mvmag_blocks(f)));
  f.block(2, 1).mv = MotionVector{4, 0};
  const Grid g = mvmag_blocks(f);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 5; ++x) CHECK(g(x, y) == (x == 2 && y == 1 ? 1.0 : 0.0));
  }
  std::mt19937 rng(2);
  std::uniform_int_distribution<int> q(-64, 64);
  for (auto& b : f.blocks) b.mv = MotionVector{q(rng), q(rng)};
  const Grid r = mvmag_blocks(f);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 5; ++x) {
      const auto& mv = *f.block(x, y).mv;
      REQUIRE(r(x, y) == doctest::Approx(std::sqrt(mv.dx * mv.dx + mv.dy * mv.dy) / 4.0).epsilon(1e-15));
    }
  }
  CHECK(kind_of([] { mvmag_blocks(i_frame(2, 2)); }) == ErrorKind::kInvalidParameter);
}

namespace {

// Window: the last `wt` P-frames up to t, blocks at offsets -(s-1)/2 .. s/2.
Grid pmes_oracle(const std::vector<FrameFeatures>& frames, std::size_t t, int ws, int wt, double eps) {
  std::vector<std::size_t> window;
  for (std::size_t j = t + 1; j-- > 0 && static_cast<int>(window.size()) < wt;) {
    if (frames[j].type == FrameType::kP) window.push_back(j);
  }
  const FrameFeatures& cur = frames[t];
  Grid out({cur.grid_w, cur.grid_h});
  for (int by = 0; by < cur.grid_h; ++by) {
    for (int bx = 0; bx < cur.grid_w; ++bx) {
      double mags = 0.0;
      int n = 0;
      double c = 0.0, s = 0.0;
      int moving = 0;
      for (std::size_t j : window) {
        for (int y = by - (ws - 1) / 2; y <= by + ws / 2; ++y) {
          for (int x = bx - (ws - 1) / 2; x <= bx + ws / 2; ++x) {
            if (x < 0 || y < 0 || x >= cur.grid_w || y >= cur.grid_h) continue;
            const MotionVector mv = *frames[j].block(x, y).mv;
            const double m = std::hypot(mv.dx, mv.dy) / 4.0;
            mags += m;
            ++n;
            if (m > eps) {
              const double angle = std::atan2(mv.dy, mv.dx);
              c += std::cos(angle);
              s += std::sin(angle);
              ++moving;
            }
          }
        }
      }
      if (moving == 0) continue;
      const double r = std::hypot(c, s) / moving;
      out(bx, by) = mags / n * (1.0 - r);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("pmes") {
  SUBCASE("uniform field is perfectly coherent") {
    FrameFeatures f = p_frame(6, 5);
    for (auto& b : f.blocks) b.mv = MotionVector{7, -3};
    const std::vector<FrameFeatures> frames{f};
    CHECK(all_zero(pmes_blocks(frames, 0)));
  }
  SUBCASE("angles spread evenly round the circle") {
    FrameFeatures f = p_frame(2, 2);
    f.block(0, 0).mv = MotionVector{8, 0};
    f.block(1, 0).mv = MotionVector{0, 8};
    f.block(0, 1).mv = MotionVector{-8, 0};
    f.block(1, 1).mv = MotionVector{0, -8};
    const std::vector<FrameFeatures> frames{f};
    const Grid g = pmes_blocks(frames, 0, {2, 1, 0.5});
    // Resultant length 0: saliency equals the common magnitude.
    CHECK(g(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("divergent patch on a still background") {
    FrameFeatures f = p_frame(12, 10);
    for (int y = 4; y <= 6; ++y) {
      for (int x = 6; x <= 8; ++x) f.block(x, y).mv = MotionVector{(x - 7) * 12, (y - 5) * 12};
    }
    const std::vector<FrameFeatures> frames{f};
    const auto [ax, ay] = argmax(pmes_blocks(frames, 0));
    CHECK(ax >= 6);
    CHECK(ax <= 8);
    CHECK(ay >= 4);
    CHECK(ay <= 6);
  }
  SUBCASE("random streams against the window definition") {
    std::mt19937 rng(9);
    std::uniform_int_distribution<int> q(-12, 12);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<FrameFeatures> frames;
      for (int t = 0; t < 7; ++t) {
        FrameFeatures f = t % 4 == 0 ? i_frame(7, 6, t) : p_frame(7, 6, t);
        if (f.type == FrameType::kP) {
          for (auto& b : f.blocks) b.mv = MotionVector{q(rng), q(rng)};
        }
        frames.push_back(f);
      }
      const int ws = 1 + trial % 4;
      const int wt = 1 + trial % 3;
      for (std::size_t t = 1; t < frames.size(); ++t) {
        if (frames[t].type != FrameType::kP) continue;
        const Grid got = pmes_blocks(frames, t, {ws, wt, 0.5});
        const Grid want = pmes_oracle(frames, t, ws, wt, 0.5);
        for (std::size_t i = 0; i < got.size(); ++i) {
          REQUIRE(std::abs(got.values()[i] - want.values()[i]) < 1e-9);
        }
      }
    }
  }
  SUBCASE("bad windows") {
    const std::vector<FrameFeatures> frames{p_frame(2, 2)};
    CHECK(kind_of([&] { pmes_blocks(frames, 0, {0, 3, 0.5}); }) == ErrorKind::kInvalidParameter);
    CHECK(kind_of([&] { pmes_blocks(frames, 0, {3, 0, 0.5}); }) == ErrorKind::kInvalidParameter);
    CHECK(kind_of([] { make_model("pmes", {{"window_s", 0}}); }) == ErrorKind::kConfig);
  }
}

TEST_CASE("csdct") {
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> lv(-20, 20), len(0, 12);
  FrameFeatures f = i_frame(4, 4);
  for (auto& b : f.blocks) {
    b.dct.resize(static_cast<std::size_t>(len(rng)));
    for (int& c : b.dct) c = lv(rng);
  }
  const CsdctParams params{9, 20.0};
  const Grid got = csdct_blocks(f, params);
  for (int i = 0; i < 16; ++i) {
    double want = 0.0;
    for (int j = 0; j < 16; ++j) {
      if (j == i) continue;
      double ss = 0.0;
      for (std::size_t c = 0; c < 9; ++c) {
        const auto& a = f.blocks[i].dct;
        const auto& b = f.blocks[j].dct;
        const double d = (c < a.size() ? a[c] : 0) - (c < b.size() ? b[c] : 0);
        ss += d * d;
      }
      const double dist = std::hypot(8.0 * (i % 4 - j % 4), 8.0 * (i / 4 - j / 4));
      want += std::sqrt(ss) * std::exp(-dist / 20.0);
    }
    REQUIRE(std::abs(got.values()[i] - want) < 1e-9);
  }

  FrameFeatures shifted = f;
  for (auto& b : shifted.blocks) {
    if (b.dct.empty()) b.dct.push_back(0);
    b.dct[0] += 17;
  }
  FrameFeatures padded = f;
  for (auto& b : padded.blocks) {
    if (b.dct.empty()) b.dct.push_back(0);
  }
  const Grid a = csdct_blocks(padded, params);
  const Grid b = csdct_blocks(shifted, params);
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::abs(a.values()[i] - b.values()[i]) < 1e-9);

  FrameFeatures same = p_frame(5, 5);
  for (auto& blk : same.blocks) blk.dct = {10, 2, 3};
  CHECK(all_zero(csdct_blocks(same)));
  same.block(1, 3).dct = {30, -2, 3};
  CHECK(argmax(csdct_blocks(same)) == std::pair{1, 3});

  CHECK(kind_of([&] { csdct_blocks(f, {9, 0.0}); }) == ErrorKind::kInvalidParameter);
  CHECK(make_model("csdct")->covers(FrameType::kI));
}

TEST_CASE("obdl") {
  std::vector<FrameFeatures> frames;
  for (int t = 0; t < 8; ++t) {
    FrameFeatures f = t == 0 ? i_frame(3, 2, t) : p_frame(3, 2, t);
    for (std::size_t i = 0; i < f.blocks.size(); ++i) f.blocks[i].bits = 10 * t + static_cast<int>(i);
    frames.push_back(f);
  }
  for (std::size_t t = 1; t < frames.size(); ++t) {
    const Grid got = obdl_blocks(frames, t, {3});
    for (std::size_t i = 0; i < got.size(); ++i) {
      double sum = 0.0;
      int n = 0;
      for (std::size_t j = t >= 2 ? t - 2 : 0; j <= t; ++j) {
        if (frames[j].type != FrameType::kP) continue;
        sum += frames[j].blocks[i].bits * 4.0;  // 8x8 -> 16x16 area
        ++n;
      }
      REQUIRE(got.values()[i] == doctest::Approx(sum / n).epsilon(1e-14));
    }
  }

  FrameFeatures hot = p_frame(6, 6, 0);
  hot.block(4, 1).bits = 500;
  CHECK(argmax(obdl_blocks(std::vector<FrameFeatures>{hot}, 0)) == std::pair{4, 1});

  SequenceBundle b;
  b.sequence_id = "flat";
  b.map_dims = {24, 16};
  b.frames = {i_frame(3, 2, 0), p_frame(3, 2, 1)};
  auto model = make_model("obdl");
  CHECK(model->check(b).size() == 1);
  CHECK(all_zero(model->predict(b, 1).grid()));
  for (auto& blk : b.frames[1].blocks) blk.bits = 9;
  CHECK(model->check(b).empty());
  CHECK(all_zero(model->predict(b, 1).grid()));
}

TEST_CASE("global motion fit") {
  const auto field = [](const GlobalMotion& g, int gw, int gh) {
    std::vector<BlockDisplacement> out;
    for (int by = 0; by < gh; ++by) {
      for (int bx = 0; bx < gw; ++bx) {
        const Point c{bx * 16 + 8.0, by * 16 + 8.0};
        const Point p = g.apply(c);
        out.push_back({c, {p.x - c.x, p.y - c.y}});
      }
    }
    return out;
  };
  SUBCASE("pure translation") {
    const auto fit = fit_global_motion(field({1, 0, 3, -1}, 22, 18));
    CHECK_FALSE(fit.fallback);
    CHECK(std::abs(fit.motion.a - 1) < 1e-6);
    CHECK(std::abs(fit.motion.b) < 1e-6);
    CHECK(std::abs(fit.motion.tx - 3) < 1e-6);
    CHECK(std::abs(fit.motion.ty + 1) < 1e-6);
  }
  SUBCASE("zoom") {
    const GlobalMotion truth{1.02, 0, -176 * 0.02, -144 * 0.02};
    const auto fit = fit_global_motion(field(truth, 22, 18));
    CHECK(std::abs(fit.motion.a - 1.02) < 1e-6);
    CHECK(std::abs(fit.motion.b) < 1e-6);
    CHECK(std::abs(fit.motion.tx - truth.tx) < 1e-6);
    CHECK(std::abs(fit.motion.ty - truth.ty) < 1e-6);
  }
  SUBCASE("planted outliers") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> junk(-20, 20);
    auto f = field({1, 0, 3, -1}, 22, 18);
    std::vector<std::size_t> idx(f.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < f.size() / 5; ++k) f[idx[k]].displacement = {junk(rng), junk(rng)};
    const auto fit = fit_global_motion(f);
    const GlobalMotion& m = fit.motion;
    const Point c{176, 144};
    const Point p = m.apply(c);
    CHECK(std::hypot(p.x - c.x - 3, p.y - c.y + 1) < 0.1);
  }
  SUBCASE("too few blocks") {
    auto f = field({1, 0, 3, -1}, 3, 1);
    const auto fit = fit_global_motion(f);
    CHECK(fit.fallback);
    CHECK(fit.motion.is_identity());
  }
}

TEST_CASE("gmc-mvmag") {
  FrameFeatures pan = p_frame(20, 15);
  for (auto& b : pan.blocks) b.mv = MotionVector{12, -4};
  CHECK(all_zero(gmc_residual_blocks(pan)));
  CHECK_FALSE(all_zero(mvmag_blocks(pan)));

  FrameFeatures mover = pan;
  mover.block(13, 4).mv = MotionVector{-20, 16};
  const Grid g = gmc_residual_blocks(mover);
  CHECK(argmax(g) == std::pair{13, 4});
  CHECK(g(13, 4) == doctest::Approx(std::hypot(-32, 20) / 4.0));

  FrameFeatures still = p_frame(20, 15);
  CHECK(gmc_residual_blocks(still) == mvmag_blocks(still));
  FrameFeatures tiny = p_frame(3, 1);
  tiny.block(1, 0).mv = MotionVector{5, 5};
  CHECK(gmc_residual_blocks(tiny) == mvmag_blocks(tiny));
}

TEST_CASE("registry") {
  CHECK(model_ids() == std::vector<std::string>{"gauss", "io", "mvmag", "pmes", "csdct", "obdl", "gmc-mvmag"});
  for (const std::string& id : model_ids()) CHECK(make_model(id)->id() == id);
  CHECK(kind_of([] { make_model("deepgaze"); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { make_model("mvmag", {{"radius", 3}}); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { make_model("csdct", {{"decay_px", -1.0}}); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { make_model("obdl", {{"temporal_smooth", 1.5}}); }) == ErrorKind::kConfig);
  CHECK_NOTHROW(make_model("pmes", {{"window_s", 5}, {"window_t", 2}, {"epsilon_px", 0.25}, {"smooth_sigma", 0}}));

  const std::vector<std::string> i_scorers{"gauss", "io", "csdct"};
  for (const std::string& id : model_ids()) {
    const bool want = std::find(i_scorers.begin(), i_scorers.end(), id) != i_scorers.end();
    CHECK(make_model(id)->covers(FrameType::kI) == want);
    CHECK(make_model(id)->covers(FrameType::kP));
  }

  SequenceBundle b;
  b.sequence_id = "s";
  b.geometry = kSfu;
  b.gaze_to_map_scale = 0.5;
  b.map_dims = {40, 32};
  b.frames = {i_frame(5, 4, 0), p_frame(5, 4, 1), p_frame(5, 4, 2)};
  b.frames[2].block(1, 1).mv = MotionVector{8, 8};
  b.gaze = GazeTable("s");
  b.gaze.add({30, 30, 1, "o", Viewing::kCounterpart});
  for (const std::string& id : model_ids()) {
    const ModelOutput out = run_model(*make_model(id), b);
    REQUIRE(out.maps.size() == 3);
    CHECK(out.maps[0].has_value() == out.scores_i);
    CHECK(out.maps[1].has_value());
    for (const auto& m : out.maps) {
      if (!m) continue;
      for (double v : m->grid().values()) REQUIRE((std::isfinite(v) && v >= 0.0));
    }
  }
}
