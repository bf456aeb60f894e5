#include "fastabs/geometry.hpp"

#include "generators.hpp"

#include <doctest.h>

using namespace fastabs;

TEST_CASE("handset layout rotates module 0 AoAs by -90 degrees") {
  const ModuleLayout layout = two_module_handset_layout();
  REQUIRE(layout.size() == 2);
  CHECK(rad2deg(layout.rotation(0, 1)) == doctest::Approx(-90.0));
  CHECK(rad2deg(layout.rotation(1, 0)) == doctest::Approx(90.0));
  CHECK(layout.rotation(1, 1) == 0.0);

  const PathTuple p{Complex(1, 0), deg2rad(130.0), 10e-9};
  const auto mapped = map_tuples(std::span(&p, 1), layout, 0, 1, 1.0);
  CHECK(rad2deg(mapped[0].aoa) == doctest::Approx(40.0));
}

TEST_CASE("delay offset is the projection of the baseline onto the arrival direction") {
  const ModuleLayout layout({{0.0, 0.0, 0.0}, {0.1, 0.0, 0.0}, {0.0, 0.05, deg2rad(-90.0)}});
  // Source along +x: module 1 sits 10 cm closer, so module 0 lags it by 0.1/c.
  CHECK(delay_offset(layout, 1, 0, 1e-9) == doctest::Approx(0.1 / kSpeedOfLight));
  CHECK(delay_offset(layout, 0, 1, 1e-9) == doctest::Approx(-0.1 / kSpeedOfLight));
  // Broadside on module 0 is along +y.
  CHECK(delay_offset(layout, 2, 0, kPi / 2) == doctest::Approx(0.05 / kSpeedOfLight));
  // Module 2's local 90 deg points along -x.
  CHECK(delay_offset(layout, 1, 2, kPi / 2) == doctest::Approx(-0.1 / kSpeedOfLight));
  CHECK_THROWS_AS(delay_offset(layout, 0, 1, -0.2), std::invalid_argument);
  CHECK_THROWS_AS(delay_offset(layout, 0, 3, 1.0), std::out_of_range);
  CHECK(projected_delay(layout, 0, 1, -0.2) == doctest::Approx(-0.1 * std::cos(-0.2) / kSpeedOfLight));
}

TEST_CASE("mapping p to q and back is the identity") {
  gen::Source s(31);
  const ModuleLayout layout({{0.0, 0.0, 0.0}, {0.05, 0.12, deg2rad(-90.0)}, {-0.03, 0.02, deg2rad(35.0)}});
  for (int trial = 0; trial < 200; ++trial) {
    const int p = s.integer(0, 2);
    const int q = s.integer(0, 2);
    const auto paths = gen::paths(s, 2);
    const auto there = map_tuples(paths, layout, p, q, 0.5);
    const auto back = map_tuples(there, layout, q, p, 2.0);
    for (std::size_t i = 0; i < paths.size(); ++i) {
      CHECK(back[i].aoa == doctest::Approx(paths[i].aoa).epsilon(1e-13));
      CHECK(std::abs(back[i].toa - paths[i].toa) < 1e-20);
      CHECK(std::abs(back[i].gain - paths[i].gain) < 1e-14);
      CHECK(std::abs(there[i].gain - 0.5 * paths[i].gain) < 1e-14);
    }
  }
}

TEST_CASE("mapped angles are never wrapped") {
  const ModuleLayout layout = two_module_handset_layout();
  const PathTuple p{Complex(1, 0), deg2rad(40.0), 0.0};
  const auto mapped = map_tuples(std::span(&p, 1), layout, 0, 1, 1.0);
  CHECK(rad2deg(mapped[0].aoa) == doctest::Approx(-50.0));
  CHECK_FALSE(in_observable_range(mapped[0].aoa));
  CHECK(in_observable_range(deg2rad(1.0)));
  CHECK_FALSE(in_observable_range(0.0));
  CHECK_FALSE(in_observable_range(kPi));
}

TEST_CASE("power reports and ratios") {
  const PowerReport r{{0.1, 1.0}};
  CHECK(power_ratio(r, 0, 1) == doctest::Approx(std::sqrt(10.0)));
  CHECK(power_ratio(r, 1, 0) == doctest::Approx(std::sqrt(0.1)));
  CHECK_THROWS_AS(power_ratio(PowerReport{{0.0, 1.0}}, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(power_ratio(r, 0, 2), std::out_of_range);
  CHECK_THROWS_AS(PowerReport{{-1.0}}.validate(), std::invalid_argument);
}

TEST_CASE("pseudo-omni power counts visible paths only") {
  const std::vector<PathTuple> paths{{Complex(1, 0), 1.0, 0.0}, {Complex(0, 0.5), -0.3, 0.0}};
  CHECK(pseudo_omni_power(paths) == doctest::Approx(1.0));
  Rng rng(3);
  const double noisy = pseudo_omni_power(paths, 1e-4, &rng);
  CHECK(noisy >= 0.0);
  CHECK(std::abs(noisy - 1.0) < 0.1);
  CHECK_THROWS_AS(pseudo_omni_power(paths, 1e-4, nullptr), std::invalid_argument);
}

TEST_CASE("layout validation") {
  CHECK_THROWS_AS(ModuleLayout(std::vector<ModulePlacement>{}), std::invalid_argument);
  CHECK_THROWS_AS(ModuleLayout({{std::nan(""), 0.0, 0.0}}), std::invalid_argument);
  const ModuleLayout layout = two_module_handset_layout();
  CHECK_THROWS_AS(layout.module(2), std::out_of_range);
  CHECK_THROWS_AS(map_tuples(std::vector<PathTuple>{}, layout, 0, 1, -1.0), std::invalid_argument);
}
