#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sigfolio/rng.hpp"

using sigfolio::RandomStream;
using sigfolio::detail::philox4x32_10;

TEST_CASE("philox4x32-10 matches published known-answer vectors", "[rng]") {
  // Reference vectors for Philox4x32 with 10 rounds.
  auto r1 = philox4x32_10({0u, 0u, 0u, 0u}, {0u, 0u});
  CHECK(r1[0] == 0x6627e8d5u);
  CHECK(r1[1] == 0xe169c58du);
  CHECK(r1[2] == 0xbc57ac4cu);
  CHECK(r1[3] == 0x9b00dbd8u);

  auto r2 = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                          {0xffffffffu, 0xffffffffu});
  CHECK(r2[0] == 0x408f276du);
  CHECK(r2[1] == 0x41c83b0eu);
  CHECK(r2[2] == 0xa20bc7c6u);
  CHECK(r2[3] == 0x6d5451fdu);
}

TEST_CASE("streams are deterministic and purpose-separated", "[rng]") {
  RandomStream a(42, sigfolio::kStreamMarketShocks);
  RandomStream b(42, sigfolio::kStreamMarketShocks);
  RandomStream c(42, sigfolio::kStreamProjections);
  bool purpose_differs = false;
  for (int i = 0; i < 100; ++i) {
    const double ua = a.uniform();
    CHECK(ua == b.uniform());
    if (ua != c.uniform()) purpose_differs = true;
    CHECK(ua >= 0.0);
    CHECK(ua < 1.0);
  }
  CHECK(purpose_differs);
}

TEST_CASE("first gaussian equals a by-hand Box-Muller on the raw words", "[rng]") {
  RandomStream words(7, sigfolio::kStreamProjections);
  const std::uint32_t w0 = words.next_u32();
  const std::uint32_t w1 = words.next_u32();
  const std::uint32_t w2 = words.next_u32();
  const std::uint32_t w3 = words.next_u32();
  const double u1 = (static_cast<double>(w0 >> 5) * 67108864.0 + static_cast<double>(w1 >> 6)) /
                    9007199254740992.0;
  const double u2 = (static_cast<double>(w2 >> 5) * 67108864.0 + static_cast<double>(w3 >> 6)) /
                    9007199254740992.0;
  const double z0 = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  const double z1 = std::sqrt(-2.0 * std::log(u1)) * std::sin(2.0 * M_PI * u2);

  RandomStream g(7, sigfolio::kStreamProjections);
  CHECK(g.gaussian() == z0);
  CHECK(g.gaussian() == z1);
}

TEST_CASE("gaussian moments are sane over 100k draws", "[rng]") {
  RandomStream g(123, sigfolio::kStreamMarketShocks);
  const int n = 100000;
  double sum = 0.0;
  double sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = g.gaussian();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var > 0.97);
  CHECK(var < 1.03);
}

TEST_CASE("matrix fill is row-major in draw order", "[rng]") {
  RandomStream g1(5, sigfolio::kStreamProjections);
  Eigen::MatrixXd m(2, 3);
  g1.fill_gaussian(m, 0.5, 2.0);

  RandomStream g2(5, sigfolio::kStreamProjections);
  std::vector<double> flat;
  for (int i = 0; i < 6; ++i) flat.push_back(0.5 + 2.0 * g2.gaussian());
  CHECK(m(0, 0) == flat[0]);
  CHECK(m(0, 1) == flat[1]);
  CHECK(m(0, 2) == flat[2]);
  CHECK(m(1, 0) == flat[3]);
  CHECK(m(1, 2) == flat[5]);
}
