#include "cavwatch/attack.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include "cavwatch/errors.hpp"

namespace cavwatch {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void reject_unknown(const nlohmann::json &j, std::initializer_list<const char *> allowed,
                    const char *where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key()))
      throw ValidationError(std::string(where) + ": unknown key '" + it.key() + "'");
}

double number(const nlohmann::json &j, const char *key, const char *where) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ValidationError(std::string(where) + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

}  // namespace

std::string kind_name(const AttackKind &kind) {
  return std::visit(overloaded{[](const GapScale &) { return std::string("GapScale"); },
                               [](const GapNoise &) { return std::string("GapNoise"); },
                               [](const GapExpDecay &) { return std::string("GapExpDecay"); },
                               [](const PositionShift &) { return std::string("PositionShift"); },
                               [](const TimeShift &) { return std::string("TimeShift"); }},
                    kind);
}

void AttackSpec::validate() const {
  if (victim < 1) throw ValidationError("attack: victim must be >= 1 (the lead vehicle has no leader)");
  if (!(onset >= 0)) throw ValidationError("attack: onset must be >= 0");
  if (duration && !(*duration > 0)) throw ValidationError("attack: duration must be > 0");
  std::visit(overloaded{
                 [](const GapScale &k) {
                   if (!(k.factor > 0)) throw ValidationError("attack: GapScale factor must be > 0");
                 },
                 [](const GapNoise &k) {
                   if (!(k.low < k.high)) throw ValidationError("attack: GapNoise needs low < high");
                 },
                 [](const GapExpDecay &k) {
                   if (!(k.lambda > 0)) throw ValidationError("attack: GapExpDecay lambda must be > 0");
                   if (!(k.floor > 0 && k.floor <= 1))
                     throw ValidationError("attack: GapExpDecay floor must be in (0, 1]");
                 },
                 [](const PositionShift &) {},
                 [](const TimeShift &k) {
                   if (k.delay_steps < 1) throw ValidationError("attack: TimeShift delay_steps must be >= 1");
                 }},
             kind);
}

bool AttackSpec::active_at(double t) const {
  if (t < onset) return false;
  return !duration || t < onset + *duration;
}

nlohmann::json to_json(const AttackSpec &spec) {
  nlohmann::json kind = std::visit(
      overloaded{[](const GapScale &k) { return nlohmann::json{{"GapScale", {{"factor", k.factor}}}}; },
                 [](const GapNoise &k) {
                   return nlohmann::json{{"GapNoise", {{"low", k.low}, {"high", k.high}}}};
                 },
                 [](const GapExpDecay &k) {
                   return nlohmann::json{{"GapExpDecay", {{"lambda", k.lambda}, {"floor", k.floor}}}};
                 },
                 [](const PositionShift &k) {
                   return nlohmann::json{{"PositionShift", {{"offset", k.offset}}}};
                 },
                 [](const TimeShift &k) {
                   return nlohmann::json{{"TimeShift", {{"delay_steps", k.delay_steps}}}};
                 }},
      spec.kind);
  return {{"victim", spec.victim},
          {"onset", spec.onset},
          {"duration", spec.duration ? nlohmann::json(*spec.duration) : nlohmann::json(nullptr)},
          {"kind", kind},
          {"seed", spec.seed}};
}

AttackSpec attack_from_json(const nlohmann::json &j) {
  reject_unknown(j, {"victim", "onset", "duration", "kind", "seed"}, "attack");
  AttackSpec spec;
  if (j.contains("victim")) {
    if (!j.at("victim").is_number_unsigned()) throw ValidationError("attack: victim must be a non-negative integer");
    spec.victim = j.at("victim").get<std::size_t>();
  }
  if (j.contains("onset")) spec.onset = number(j, "onset", "attack");
  if (j.contains("duration") && !j.at("duration").is_null())
    spec.duration = number(j, "duration", "attack");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ValidationError("attack: seed must be a non-negative integer");
    spec.seed = j.at("seed").get<std::uint64_t>();
  }
  if (!j.contains("kind")) throw ValidationError("attack: missing 'kind'");
  const auto &k = j.at("kind");
  if (!k.is_object() || k.size() != 1) throw ValidationError("attack: 'kind' must hold exactly one variant");
  const std::string name = k.begin().key();
  const auto &body = k.begin().value();
  if (name == "GapScale") {
    reject_unknown(body, {"factor"}, "GapScale");
    spec.kind = GapScale{number(body, "factor", "GapScale")};
  } else if (name == "GapNoise") {
    reject_unknown(body, {"low", "high"}, "GapNoise");
    spec.kind = GapNoise{number(body, "low", "GapNoise"), number(body, "high", "GapNoise")};
  } else if (name == "GapExpDecay") {
    reject_unknown(body, {"lambda", "floor"}, "GapExpDecay");
    spec.kind = GapExpDecay{number(body, "lambda", "GapExpDecay"), number(body, "floor", "GapExpDecay")};
  } else if (name == "PositionShift") {
    reject_unknown(body, {"offset"}, "PositionShift");
    spec.kind = PositionShift{number(body, "offset", "PositionShift")};
  } else if (name == "TimeShift") {
    reject_unknown(body, {"delay_steps"}, "TimeShift");
    if (!body.contains("delay_steps") || !body.at("delay_steps").is_number_unsigned())
      throw ValidationError("TimeShift: 'delay_steps' must be a non-negative integer");
    spec.kind = TimeShift{body.at("delay_steps").get<std::size_t>()};
  } else {
    throw ValidationError("attack: unknown kind '" + name + "'");
  }
  spec.validate();
  return spec;
}

double noise_sample(NoiseStream &stream, double low, double high) {
  const double u = low + (high - low) * uniform01(stream.engine());
  // Rounding can land exactly on `high`; keep the interval half-open.
  return u < high ? u : std::nextafter(high, low);
}

double perceive_gap(const AttackSpec &spec, double dt, const GapQuery &q, NoiseStream &noise) {
  if (q.follower != spec.victim || !spec.active_at(q.time)) return q.true_gap;
  return std::visit(
      overloaded{
          [&](const GapScale &k) { return k.factor * q.true_gap; },
          [&](const GapNoise &k) { return q.true_gap + noise_sample(noise, k.low, k.high); },
          [&](const GapExpDecay &k) {
            return q.true_gap * std::max(k.floor, std::exp(-k.lambda * (q.time - spec.onset)));
          },
          [&](const PositionShift &k) { return q.true_gap + k.offset; },
          [&](const TimeShift &k) {
            const auto onset_step = static_cast<std::size_t>(std::ceil(spec.onset / dt));
            std::size_t delayed = onset_step;
            if (q.step >= k.delay_steps && q.step - k.delay_steps >= onset_step)
              delayed = q.step - k.delay_steps;
            if (delayed > q.step || q.step >= q.history.steps())
              throw HistoryUnavailable("time shift needs row " + std::to_string(delayed) +
                                       " and row " + std::to_string(q.step) + " but history has " +
                                       std::to_string(q.history.steps()));
            const double drift = q.history.at(q.step, q.leader) - q.history.at(delayed, q.leader);
            return q.true_gap - drift;
          }},
      spec.kind);
}

PerceptionHook make_perception(const AttackSpec &spec, double dt) {
  auto noise = std::make_shared<NoiseStream>(spec.seed);
  return [spec, dt, noise](const LeaderObservation &obs, const StepClock &clock) {
    if (obs.follower != spec.victim) return Perceived{obs.gap, obs.dv};
    GapQuery q{clock.time, clock.step, obs.follower, obs.leader, obs.gap, clock.history};
    return Perceived{perceive_gap(spec, dt, q, *noise), obs.dv};
  };
}

}  // namespace cavwatch
