#include "cavwatch/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cavwatch/csv.hpp"
#include "cavwatch/errors.hpp"
#include "cavwatch/rng.hpp"

namespace cavwatch {

namespace {

template <class T>
T get(const nlohmann::json &v, const std::string &where) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(where + ": " + e.what());
  }
}

bool valid_name(const std::string &s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

NamedAttack named_attack_from_json(const nlohmann::json &j) {
  if (!j.is_object()) throw ValidationError("attacks: each entry must be an object");
  NamedAttack a;
  nlohmann::json spec = j;
  if (auto it = spec.find("name"); it != spec.end()) {
    a.name = get<std::string>(*it, "attacks.name");
    spec.erase("name");
  }
  a.spec = attack_from_json(spec);
  if (a.name.empty()) {
    a.name = kind_name(a.spec.kind);
    std::transform(a.name.begin(), a.name.end(), a.name.begin(), [](unsigned char c) { return std::tolower(c); });
  }
  return a;
}

}  // namespace

nlohmann::json to_json(const IdmParams &p) {
  return {{"v0", p.v0}, {"s0", p.s0},           {"a", p.a},         {"b", p.b},
          {"time_gap", p.time_gap}, {"delta", p.delta}, {"length", p.length}};
}

IdmParams idm_from_json(const nlohmann::json &j) {
  IdmParams p;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto &k = it.key();
    const double v = get<double>(*it, "idm." + k);
    if (k == "v0") p.v0 = v;
    else if (k == "s0") p.s0 = v;
    else if (k == "a") p.a = v;
    else if (k == "b") p.b = v;
    else if (k == "time_gap") p.time_gap = v;
    else if (k == "delta") p.delta = v;
    else if (k == "length") p.length = v;
    else throw ValidationError("idm: unknown key '" + k + "'");
  }
  p.validate();
  return p;
}

nlohmann::json to_json(const SimConfig &c) {
  return {{"n_vehicles", c.n_vehicles},
          {"road_length", c.road_length},
          {"dt", c.dt},
          {"total_steps", c.total_steps},
          {"leaders_considered", c.leaders_considered},
          {"initial_gap", c.initial_gap},
          {"seed", c.seed},
          {"idm", to_json(c.params)}};
}

SimConfig sim_from_json(const nlohmann::json &j) {
  SimConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto &k = it.key();
    const auto where = "sim." + k;
    if (k == "n_vehicles") c.n_vehicles = get<std::size_t>(*it, where);
    else if (k == "road_length") c.road_length = get<double>(*it, where);
    else if (k == "dt") c.dt = get<double>(*it, where);
    else if (k == "total_steps") c.total_steps = get<std::size_t>(*it, where);
    else if (k == "leaders_considered") c.leaders_considered = get<std::size_t>(*it, where);
    else if (k == "initial_gap") c.initial_gap = get<double>(*it, where);
    else if (k == "seed") c.seed = get<std::uint64_t>(*it, where);
    else if (k == "idm") c.params = idm_from_json(*it);
    else throw ValidationError("sim: unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

void RunConfig::validate() const {
  sim.validate();
  window().validate();
  model.validate();
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ValidationError("split_fraction must lie in (0, 1)");
  if (!(percentile > 0.0 && percentile < 100.0)) throw ValidationError("percentile must lie in (0, 100)");
  if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
  std::set<std::string> names;
  for (const auto &a : attacks) {
    a.spec.validate();
    if (a.spec.victim >= sim.n_vehicles)
      throw ValidationError("attack '" + a.name + "': victim index " + std::to_string(a.spec.victim) +
                            " is outside the platoon");
    if (!valid_name(a.name)) throw ValidationError("attack name '" + a.name + "' must be [A-Za-z0-9_-]+");
    if (a.name == "normal") throw ValidationError("attack name 'normal' is reserved");
    if (!names.insert(a.name).second) throw ValidationError("duplicate attack name '" + a.name + "'");
  }
}

SimConfig RunConfig::effective_sim() const {
  SimConfig s = sim;
  s.seed = derive_seed(seed ^ sim.seed, "sim");
  return s;
}

ModelConfig RunConfig::effective_model() const {
  ModelConfig m = model;
  m.forest.seed = derive_seed(seed ^ model.forest.seed, "forest");
  m.lstm.seed = derive_seed(seed ^ model.lstm.seed, "lstm");
  return m;
}

AttackSpec RunConfig::effective_attack(std::size_t i) const {
  AttackSpec a = attacks.at(i).spec;
  a.seed = derive_seed(seed ^ a.seed, "attack/" + attacks[i].name);
  return a;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto &a : attacks) {
    auto j = cavwatch::to_json(a.spec);
    j["name"] = a.name;
    list.push_back(std::move(j));
  }
  return {{"sim", cavwatch::to_json(sim)},
          {"window", {{"t1", t1}, {"t2", t2}}},
          {"attacks", std::move(list)},
          {"model", model.to_json()},
          {"split_fraction", split_fraction},
          {"percentile", percentile},
          {"output_dir", output_dir.generic_string()},
          {"seed", seed}};
}

RunConfig RunConfig::from_json(const nlohmann::json &j) {
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  RunConfig c;
  bool have_attack = false, have_attacks = false;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto &k = it.key();
    if (k == "sim") c.sim = sim_from_json(*it);
    else if (k == "window") {
      for (auto w = it->begin(); w != it->end(); ++w) {
        if (w.key() == "t1") c.t1 = get<std::size_t>(*w, "window.t1");
        else if (w.key() == "t2") c.t2 = get<std::size_t>(*w, "window.t2");
        else if (w.key() != "n") throw ValidationError("window: unknown key '" + w.key() + "'");
      }
    } else if (k == "attack") {
      have_attack = true;
      if (!it->is_null()) c.attacks.push_back(named_attack_from_json(*it));
    } else if (k == "attacks") {
      have_attacks = true;
      if (!it->is_array()) throw ValidationError("attacks must be an array");
      for (const auto &a : *it) c.attacks.push_back(named_attack_from_json(a));
    } else if (k == "model") c.model = ModelConfig::from_json(*it);
    else if (k == "split_fraction") c.split_fraction = get<double>(*it, k);
    else if (k == "percentile") c.percentile = get<double>(*it, k);
    else if (k == "output_dir") c.output_dir = get<std::string>(*it, k);
    else if (k == "seed") c.seed = get<std::uint64_t>(*it, k);
    else throw ValidationError("config: unknown key '" + k + "'");
  }
  if (have_attack && have_attacks) throw ValidationError("config: use either 'attack' or 'attacks', not both");
  if (auto w = j.find("window"); w != j.end() && w->contains("n") &&
                                 get<std::size_t>(w->at("n"), "window.n") != c.sim.n_vehicles)
    throw ValidationError("window.n must equal sim.n_vehicles");
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path &path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_text(path));
  } catch (const nlohmann::json::parse_error &e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

RunConfig RunConfig::case_study() {
  RunConfig c;
  AttackSpec scale;
  scale.victim = 4;
  scale.onset = 500.0;
  scale.kind = GapScale{10.0};
  AttackSpec noise;
  noise.victim = 2;
  noise.onset = 20.0;
  noise.kind = GapNoise{-2.0, 2.0};
  AttackSpec decay;
  decay.victim = 4;
  decay.onset = 500.0;
  decay.kind = GapExpDecay{0.05, 0.1};
  c.attacks = {{"gap_scale", scale}, {"gap_noise", noise}, {"gap_exp_decay", decay}};
  c.validate();
  return c;
}

}  // namespace cavwatch
