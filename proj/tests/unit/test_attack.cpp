#include <doctest.h>

#include <cmath>

#include "cavwatch/attack.hpp"
#include "cavwatch/errors.hpp"

using namespace cavwatch;

namespace {

AttackSpec spec_of(AttackKind kind, double onset = 20.0, std::size_t victim = 2) {
  AttackSpec s;
  s.victim = victim;
  s.onset = onset;
  s.kind = kind;
  return s;
}

GapQuery query(double t, double gap, std::size_t follower = 2) {
  GapQuery q;
  q.time = t;
  q.step = static_cast<std::size_t>(t);
  q.follower = follower;
  q.leader = follower - 1;
  q.true_gap = gap;
  return q;
}

}  // namespace

TEST_SUITE("attack") {
  TEST_CASE("identity before onset for every kind") {
    NoiseStream noise(1);
    const AttackKind kinds[] = {GapScale{10.0}, GapNoise{-2.0, 2.0}, GapExpDecay{0.05, 0.1},
                                PositionShift{3.0}, TimeShift{2}};
    for (const auto &k : kinds) CHECK(perceive_gap(spec_of(k), 1.0, query(19.0, 7.0), noise) == 7.0);
  }

  TEST_CASE("non-victims see the truth") {
    NoiseStream noise(1);
    CHECK(perceive_gap(spec_of(GapScale{10.0}), 1.0, query(50.0, 7.0, 3), noise) == 7.0);
  }

  TEST_CASE("scale") {
    NoiseStream noise(1);
    CHECK(perceive_gap(spec_of(GapScale{10.0}), 1.0, query(20.0, 7.0), noise) == doctest::Approx(70.0));
    for (double t : {0.0, 20.0, 100.0})
      CHECK(perceive_gap(spec_of(GapScale{1.0}, 0.0), 1.0, query(t, 7.25), noise) == 7.25);
  }

  TEST_CASE("exponential decay") {
    NoiseStream noise(1);
    const auto s = spec_of(GapExpDecay{0.05, 0.1});
    CHECK(std::abs(perceive_gap(s, 1.0, query(30.0, 20.0), noise) - 12.130613194252668) < 1e-9);
    double prev = 1.0;
    for (int t = 20; t < 200; ++t) {
      const double m = perceive_gap(s, 1.0, query(t, 1.0), noise);
      CHECK(m <= prev);
      CHECK(m >= 0.1);
      CHECK(m <= 1.0);
      prev = m;
    }
    CHECK(perceive_gap(s, 1.0, query(1000.0, 1.0), noise) == doctest::Approx(0.1));
  }

  TEST_CASE("noise stays in [gap + low, gap + high)") {
    NoiseStream noise(7);
    const auto s = spec_of(GapNoise{-2.0, 2.0});
    for (int i = 0; i < 10000; ++i) {
      const double g = perceive_gap(s, 1.0, query(25.0, 9.0), noise);
      CHECK(g >= 7.0);
      CHECK(g < 11.0);
    }
  }

  TEST_CASE("noise sample mean and determinism") {
    NoiseStream a(42), b(42);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
      const double x = noise_sample(a, -2.0, 2.0);
      CHECK(x == noise_sample(b, -2.0, 2.0));
      sum += x;
    }
    CHECK(std::abs(sum / 100000.0) < 0.05);
  }

  TEST_CASE("degenerate noise interval collapses to low") {
    NoiseStream s(3);
    const double low = 1.0, high = std::nextafter(1.0, 2.0);
    for (int i = 0; i < 100; ++i) CHECK(noise_sample(s, low, high) == low);
  }

  TEST_CASE("position shift") {
    NoiseStream noise(1);
    CHECK(perceive_gap(spec_of(PositionShift{-3.0}), 1.0, query(20.0, 9.0), noise) == 6.0);
  }

  TEST_CASE("time shift under a constant-velocity leader") {
    // Leader (vehicle 1) moves at 8 m/s; history rows are steps 0..40.
    const std::size_t n = 3;
    std::vector<double> rows;
    for (std::size_t t = 0; t <= 40; ++t)
      for (std::size_t i = 0; i < n; ++i) rows.push_back(8.0 * static_cast<double>(t) + 100.0 * static_cast<double>(n - i));
    const PositionHistory h(rows, n);
    NoiseStream noise(1);
    const auto s = spec_of(TimeShift{3}, 20.0);
    GapQuery q = query(30.0, 12.0);
    q.history = h;
    CHECK(perceive_gap(s, 1.0, q, noise) == doctest::Approx(12.0 - 8.0 * 3.0));
    // Held at the onset row while t - delay < onset.
    q = query(21.0, 12.0);
    q.history = h;
    CHECK(perceive_gap(s, 1.0, q, noise) == doctest::Approx(12.0 - 8.0 * 1.0));
    // A row beyond the recorded history is unavailable.
    q = query(41.0, 12.0);
    q.history = h;
    CHECK_THROWS_AS(perceive_gap(s, 1.0, q, noise), HistoryUnavailable);
  }

  TEST_CASE("AttackSpec validation") {
    CHECK_THROWS_AS(spec_of(GapScale{0.0}).validate(), ValidationError);
    CHECK_THROWS_AS(spec_of(GapNoise{1.0, 1.0}).validate(), ValidationError);
    CHECK_THROWS_AS(spec_of(GapExpDecay{0.0, 0.1}).validate(), ValidationError);
    CHECK_THROWS_AS(spec_of(GapExpDecay{0.1, 1.5}).validate(), ValidationError);
    CHECK_THROWS_AS(spec_of(TimeShift{0}).validate(), ValidationError);
    CHECK_THROWS_AS(spec_of(GapScale{2.0}, 20.0, 0).validate(), ValidationError);
    auto s = spec_of(GapScale{2.0});
    s.duration = 0.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
  }

  TEST_CASE("active window") {
    auto s = spec_of(GapScale{2.0}, 20.0);
    s.duration = 10.0;
    CHECK_FALSE(s.active_at(19.999));
    CHECK(s.active_at(20.0));
    CHECK(s.active_at(29.999));
    CHECK_FALSE(s.active_at(30.0));
  }

  TEST_CASE("json round trip and strictness") {
    const auto j = nlohmann::json::parse(
        R"({"victim":4,"onset":20,"duration":null,"kind":{"GapScale":{"factor":10.0}},"seed":7})");
    const AttackSpec s = attack_from_json(j);
    CHECK(s.victim == 4);
    CHECK(!s.duration);
    CHECK(std::get<GapScale>(s.kind).factor == 10.0);
    CHECK(s.seed == 7);
    CHECK(to_json(s) == j);
    CHECK(attack_from_json(to_json(s)).onset == 20.0);
    auto bad = j;
    bad["colour"] = 1;
    CHECK_THROWS_AS(attack_from_json(bad), ValidationError);
    bad = j;
    bad["kind"] = {{"Teleport", nlohmann::json::object()}};
    CHECK_THROWS_AS(attack_from_json(bad), ValidationError);
  }

  TEST_CASE("attacked simulation matches the normal run before onset") {
    SimConfig c;
    c.total_steps = 400;
    const auto normal = simulate(c);
    const auto s = spec_of(GapNoise{-2.0, 2.0}, 200.0);
    const SimResult r = run_simulation(c, std::optional<AttackSpec>{s});
    REQUIRE(r.trajectory.steps() >= 201);
    CHECK(r.trajectory.positions.topRows(201) == normal.positions.topRows(201));
    CHECK(r.trajectory.positions.row(r.trajectory.steps() - 1) != normal.positions.row(r.trajectory.steps() - 1));
    REQUIRE(r.trajectory.attack_label);
    CHECK(r.trajectory.attack_label->victim == 2);
    const SimResult again = run_simulation(c, std::optional<AttackSpec>{s});
    CHECK(again.trajectory.positions == r.trajectory.positions);
  }

  TEST_CASE("victim outside the platoon is rejected") {
    SimConfig c;
    c.total_steps = 10;
    CHECK_THROWS_AS(run_simulation(c, std::optional<AttackSpec>{spec_of(GapScale{2.0}, 0.0, 10)}), ValidationError);
  }
}
