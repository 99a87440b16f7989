#include "doctest.h"
#include "oracles.hpp"

#include "fvv/silhouette.hpp"

#include <random>

using namespace fvv;
using namespace fvv::silhouette;

TEST_CASE("distance map equals brute-force EDT") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const int w = 5 + static_cast<int>(rng() % 40), h = 5 + static_cast<int>(rng() % 30);
    const double density = (trial % 3 == 0) ? 0.01 : (trial % 3 == 1 ? 0.1 : 0.5);
    std::bernoulli_distribution fg(density);
    Mask m(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) m.set(x, y, fg(rng));
    if (m.count() == 0) m.set(w / 2, h / 2, true);
    const auto dm = distance_map(m);
    const auto ref = oracle::brute_edt(m);
    REQUIRE(dm.width == w);
    REQUIRE(dm.height == h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) CHECK(dm.at(x, y) == doctest::Approx(ref[y * w + x]).epsilon(1e-12));
  }
}

TEST_CASE("distance map edge cases") {
  SUBCASE("empty proposal is unreachable everywhere") {
    const auto dm = distance_map(Mask(7, 4));
    for (double d : dm.d) CHECK(d == DistanceMap::kUnreachable);
  }
  SUBCASE("full proposal is zero everywhere") {
    const auto dm = distance_map(Mask(7, 4, true));
    for (double d : dm.d) CHECK(d == 0.0);
  }
  SUBCASE("single pixel") {
    Mask m(1, 1, true);
    CHECK(distance_map(m).at(0, 0) == 0.0);
  }
}

TEST_CASE("adaptive threshold ramps and clamps") {
  AdaptiveParams p;
  CHECK(p.threshold(0) == doctest::Approx(3.0));
  CHECK(p.threshold(20) == doctest::Approx(5.5));
  CHECK(p.threshold(40) == doctest::Approx(8.0));
  CHECK(p.threshold(1e6) == doctest::Approx(8.0));
  CHECK(p.threshold(DistanceMap::kUnreachable) == doctest::Approx(8.0));
  AdaptiveParams bad;
  bad.d_max = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.theta_near = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("background statistics are population mean and std with floor") {
  std::vector<ColorImage> frames;
  const std::array<std::uint8_t, 4> values{10, 20, 30, 40};
  for (auto v : values) {
    ColorImage f(2, 1, 3);
    for (auto& c : f.data) c = v;
    f.at(1, 0, 2) = 100;  // constant channel
    frames.push_back(f);
  }
  const auto bg = build_background(frames);
  CHECK(bg.mean[0] == doctest::Approx(25.0));
  CHECK(bg.stddev[0] == doctest::Approx(std::sqrt(125.0)));
  const std::size_t const_idx = (0 * 2 + 1) * 3 + 2;
  CHECK(bg.mean[const_idx] == doctest::Approx(100.0));
  CHECK(bg.stddev[const_idx] == doctest::Approx(BackgroundModel::kDefaultStdFloor));

  CHECK_THROWS_AS(build_background(std::span<const ColorImage>(frames.data(), 1)), Error);
  auto mixed = frames;
  mixed[2] = ColorImage(3, 1, 3);
  CHECK_THROWS_AS(build_background(mixed), Error);
}

TEST_CASE("extraction is stricter far from the proposal") {
  // Background mean 100, std 2. A deviation of 10 (5 sigma) passes the
  // near threshold (3) and fails the far one (8).
  BackgroundModel bg;
  bg.width = 9;
  bg.height = 1;
  bg.channels = 3;
  bg.mean.assign(27, 100.0);
  bg.stddev.assign(27, 2.0);
  ColorImage frame(9, 1, 3);
  for (auto& c : frame.data) c = 110;
  Mask proposal(9, 1);
  proposal.set(0, 0, true);
  AdaptiveParams p;
  p.d_max = 4;
  const auto sil = extract_silhouette(frame, bg, distance_map(proposal), p);
  // threshold(d) = 3 + 5 d / 4 < 5 for d < 1.6
  CHECK(sil.at(0, 0));
  CHECK(sil.at(1, 0));
  for (int x = 2; x < 9; ++x) CHECK_FALSE(sil.at(x, 0));

  SUBCASE("max over channels decides") {
    ColorImage f2(9, 1, 3);
    for (auto& c : f2.data) c = 100;
    f2.at(8, 0, 1) = 130;  // 15 sigma in one channel
    const auto s2 = extract_silhouette(f2, bg, distance_map(proposal), p);
    CHECK(s2.at(8, 0));
    CHECK(s2.count() == 1);
  }
  SUBCASE("size mismatch is an error") {
    ColorImage small(3, 1, 3);
    CHECK_THROWS_AS(extract_silhouette(small, bg, distance_map(proposal), p), Error);
  }
}

TEST_CASE("iou") {
  Mask a(4, 1), b(4, 1);
  CHECK(iou(a, b) == 1.0);
  a.set(0, 0, true);
  a.set(1, 0, true);
  b.set(1, 0, true);
  b.set(2, 0, true);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
}
