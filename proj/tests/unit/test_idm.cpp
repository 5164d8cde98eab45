#include <doctest.h>

#include <cmath>

#include "cavwatch/errors.hpp"
#include "cavwatch/idm.hpp"

using namespace cavwatch;

namespace {

IdmParams table_params(double time_gap = 1.5) {
  IdmParams p;
  p.time_gap = time_gap;
  return p;
}

}  // namespace

TEST_SUITE("idm") {
  TEST_CASE("desired spacing hand values") {
    const IdmParams p = table_params();
    CHECK(desired_spacing(0.0, 0.0, p) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(desired_spacing(10.0, 2.0, p) - 26.05691588628135) < 1e-9);
    CHECK(std::abs(desired_spacing(10.0, 0.0, p) - 17.0) < 1e-9);
  }

  TEST_CASE("desired spacing may go negative") {
    CHECK(desired_spacing(10.0, -50.0, table_params()) < 0.0);
  }

  TEST_CASE("acceleration hand values") {
    const IdmParams p = table_params();
    CHECK(std::abs(idm_acceleration({0.0, 0.0, 2.0}, p)) < 1e-12);
    CHECK(std::abs(idm_acceleration({10.0, 0.0, 1e9}, p)) < 1e-9);
    CHECK(std::abs(idm_acceleration({5.0, 0.0, 50.0}, p) - 0.658022) < 1e-9);
  }

  TEST_CASE("non-positive spacing is rejected") {
    const IdmParams p;
    CHECK_THROWS_AS(idm_acceleration({1.0, 0.0, 0.0}, p), NonPositiveSpacing);
    CHECK_THROWS_AS(idm_acceleration({1.0, 0.0, -3.0}, p), NonPositiveSpacing);
    try {
      idm_acceleration({1.0, 0.0, -3.0}, p);
    } catch (const NonPositiveSpacing &e) {
      CHECK(e.spacing() == -3.0);
    }
  }

  TEST_CASE("negative desired spacing is clamped before squaring") {
    const IdmParams p;
    // Closing away fast: s* < 0, so only the free-road term remains.
    CHECK(idm_acceleration({5.0, -40.0, 10.0}, p) == doctest::Approx(free_road_acceleration(5.0, p)));
  }

  TEST_CASE("free road") {
    const IdmParams p;
    CHECK(free_road_acceleration(0.0, p) == 0.73);
    CHECK(free_road_acceleration(p.v0, p) == 0.0);
  }

  TEST_CASE("parameter validation") {
    IdmParams p;
    p.v0 = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = {};
    p.time_gap = -1.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = {};
    p.time_gap = 0.0;
    CHECK_NOTHROW(p.validate());
  }
}
