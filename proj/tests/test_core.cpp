#include <cmath>
#include <random>

#include "cdsal/core.hpp"
#include "doctest.h"

using namespace cdsal;

namespace {

const ViewingGeometry kSfu{1280, 1024, 19.0, 80.0, 704, 576};
const ViewingGeometry kDiem{1600, 1200, 21.3, 90.0, 1280, 720};

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInternal;
}

}  // namespace

TEST_CASE("pixels per degree matches hand trigonometry") {
  // 19in over a 1280x1024 diagonal -> 0.029456 cm pitch; 2*80*tan(0.5deg) = 1.39630 cm.
  CHECK(pixels_per_degree(kSfu) == doctest::Approx(47.40).epsilon(1e-3));
  CHECK(pixels_per_degree(kDiem) == doctest::Approx(58.1).epsilon(2e-3));

  ViewingGeometry far = kSfu;
  far.viewing_distance_cm *= 2.0;
  CHECK(std::abs(pixels_per_degree(far) / pixels_per_degree(kSfu) - 2.0) < 1e-4);

  ViewingGeometry coarse = kSfu;
  coarse.screen_diagonal_in = 24.0;
  CHECK(pixels_per_degree(coarse) < pixels_per_degree(kSfu));

  CHECK(degrees_to_map_pixels(kSfu, 1.0, 0.5) == doctest::Approx(pixels_per_degree(kSfu) / 2));
}

TEST_CASE("invalid geometry is rejected") {
  ViewingGeometry g = kSfu;
  g.viewing_distance_cm = 0.0;
  CHECK(kind_of([&] { pixels_per_degree(g); }) == ErrorKind::kInvalidGeometry);
  g = kSfu;
  g.display_w_px = 2000;
  CHECK(kind_of([&] { g.validate(); }) == ErrorKind::kInvalidGeometry);
  g = kSfu;
  g.screen_h_px = std::nan("");
  CHECK(kind_of([&] { g.validate(); }) == ErrorKind::kInvalidGeometry);
}

TEST_CASE("gaussian blob shape") {
  const Dims dims{352, 288};
  const double sigma = 10.0;
  const SaliencyMap m = gaussian_blob(dims, {100.5, 80.5}, sigma);
  CHECK(m(100, 80) == 1.0);
  CHECK(m(100, 80) / m(110, 80) == doctest::Approx(std::exp(0.5)).epsilon(1e-12));

  // Truncation: strictly positive within 4 sigma, exactly zero beyond.
  CHECK(m(140, 80) > 0.0);
  CHECK(m(141, 80) == 0.0);
  CHECK(m(129, 109) == 0.0);  // 29^2 + 29^2 > 1600

  const SaliencyMap c = gaussian_blob(dims, {176.0, 144.0}, sigma);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width / 2; ++x) {
      REQUIRE(std::abs(c(x, y) - c(dims.width - 1 - x, y)) <= 1e-12);
    }
  }

  double sum = 0.0;
  for (double v : c.grid().values()) sum += v;
  double oracle = 0.0;
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const double dx = x + 0.5 - 176.0;
      const double dy = y + 0.5 - 144.0;
      const double d2 = dx * dx + dy * dy;
      if (d2 <= 16 * sigma * sigma) oracle += std::exp(-d2 / (2 * sigma * sigma));
    }
  }
  CHECK(std::abs(sum - oracle) < 1e-9);

  CHECK(kind_of([&] { gaussian_blob(dims, {1, 1}, 0.0); }) == ErrorKind::kInvalidParameter);
}

namespace {

// Direct 2D sum with the in-frame kernel mass renormalization per axis.
Grid direct_smooth(const Grid& in, double sigma) {
  const int r = static_cast<int>(std::ceil(4 * sigma));
  const auto k = [&](int d) { return std::abs(d) > r ? 0.0 : std::exp(-d * d / (2 * sigma * sigma)); };
  Grid out(in.dims());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double acc = 0.0;
      double mx = 0.0;
      double my = 0.0;
      for (int v = 0; v < in.height(); ++v) my += k(v - y);
      for (int u = 0; u < in.width(); ++u) mx += k(u - x);
      for (int v = 0; v < in.height(); ++v) {
        for (int u = 0; u < in.width(); ++u) acc += k(u - x) * k(v - y) * in(u, v);
      }
      out(x, y) = acc / (mx * my);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("block upsampling") {
  SUBCASE("constant grid stays constant") {
    const SaliencyMap m = upsample_block_map(Grid({5, 4}, 3.0), 8, {40, 30}, 4.0);
    for (double v : m.grid().values()) REQUIRE(std::abs(v - 3.0) < 1e-9);
  }
  SUBCASE("single hot block without smoothing") {
    Grid blocks({4, 4}, 0.0);
    blocks(2, 1) = 5.0;
    const SaliencyMap m = upsample_block_map(blocks, 8, {32, 32}, 0.0);
    int nonzero = 0;
    for (double v : m.grid().values()) nonzero += v != 0.0;
    CHECK(nonzero == 64);
    CHECK(m(16, 8) == 5.0);
    CHECK(m(23, 15) == 5.0);
  }
  SUBCASE("2x2 checker against direct convolution") {
    Grid blocks({2, 2}, std::vector<double>{0, 1, 1, 0});
    const SaliencyMap m = upsample_block_map(blocks, 8, {16, 16}, 2.0);
    Grid replicated({16, 16});
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) replicated(x, y) = blocks(x / 8, y / 8);
    }
    const Grid oracle = direct_smooth(replicated, 2.0);
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      REQUIRE(std::abs(m.grid().values()[i] - oracle.values()[i]) < 1e-6);
    }
  }
  SUBCASE("linear in a positive scale") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    Grid blocks({6, 5});
    Grid scaled({6, 5});
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      blocks.values()[i] = u(rng);
      scaled.values()[i] = 7.5 * blocks.values()[i];
    }
    const SaliencyMap a = upsample_block_map(blocks, 8, {44, 36}, 3.0);
    const SaliencyMap b = upsample_block_map(scaled, 8, {44, 36}, 3.0);
    for (std::size_t i = 0; i < a.grid().size(); ++i) {
      REQUIRE(std::abs(7.5 * a.grid().values()[i] - b.grid().values()[i]) < 1e-9);
    }
  }
  SUBCASE("grid that does not cover the frame") {
    CHECK(kind_of([] { upsample_block_map(Grid({4, 4}), 8, {40, 32}, 0.0); }) == ErrorKind::kDimension);
    CHECK(kind_of([] { upsample_block_map(Grid({6, 4}), 8, {40, 32}, 0.0); }) == ErrorKind::kDimension);
  }
}

TEST_CASE("minmax normalization") {
  const Grid g({3, 1}, std::vector<double>{2, 4, 6});
  const Grid n = minmax_normalize(g);
  CHECK(n(0, 0) == 0.0);
  CHECK(n(1, 0) == 0.5);
  CHECK(n(2, 0) == 1.0);
  CHECK(minmax_normalize(n) == n);
  const Grid flat = minmax_normalize(Grid({4, 4}, 9.0));
  for (double v : flat.values()) CHECK(v == 0.0);
}

TEST_CASE("map types enforce their invariants") {
  CHECK(kind_of([] { SaliencyMap(Grid({2, 1}, std::vector<double>{1, -1})); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { SaliencyMap(Grid({1, 1}, std::vector<double>{INFINITY})); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { Grid({2, 2}, std::vector<double>{1, 2, 3}); }) == ErrorKind::kDimension);
}

TEST_CASE("feature frame invariants") {
  FrameFeatures f;
  f.type = FrameType::kI;
  f.grid_w = 2;
  f.grid_h = 1;
  f.blocks.resize(2);
  CHECK_NOTHROW(f.validate());
  CHECK(f.covers({16, 8}));
  CHECK(f.covers({9, 1}));
  CHECK_FALSE(f.covers({8, 8}));
  CHECK_FALSE(f.covers({17, 8}));

  f.blocks[0].mv = MotionVector{4, 0};
  CHECK(kind_of([&] { f.validate(); }) == ErrorKind::kValidation);
  f.type = FrameType::kP;
  CHECK(kind_of([&] { f.validate(); }) == ErrorKind::kValidation);
  f.blocks[1].mv = MotionVector{0, 0};
  CHECK_NOTHROW(f.validate());
  f.blocks[1].bits = -1;
  CHECK(kind_of([&] { f.validate(); }) == ErrorKind::kValidation);
  f.blocks[1].bits = 0;
  f.block_size = 12;
  CHECK(kind_of([&] { f.validate(); }) == ErrorKind::kValidation);

  CHECK(MotionVector{12, 16}.magnitude_px() == 5.0);
}
