#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "umx/classifier.hpp"
#include "umx/error.hpp"
#include "umx/rng.hpp"
#include "umx/sim.hpp"
#include "umx/zoo.hpp"

namespace umx {

constexpr const char* kVersion = "0.1.0";

inline json to_json(const DimRange& r) { return json{{"lo", r.lo}, {"hi", r.hi}}; }

inline DimRange dim_range_from_json(const json& j) {
  detail::check_keys(j, {"lo", "hi"}, {"lo", "hi"}, "dim range");
  return DimRange{j.at("lo").get<std::int64_t>(), j.at("hi").get<std::int64_t>()};
}

inline json to_json(const RandomModelCfg& c) {
  return json{{"min_layers", c.min_layers},
              {"max_layers", c.max_layers},
              {"shortcut_probability", c.shortcut_probability},
              {"input_hw", to_json(c.input_hw)},
              {"input_ch", to_json(c.input_ch)},
              {"channels", to_json(c.channels)},
              {"fc_units", to_json(c.fc_units)},
              {"bn_probability", c.bn_probability},
              {"act_probability", c.act_probability},
              {"pool_probability", c.pool_probability},
              {"tail_probability", c.tail_probability}};
}

inline RandomModelCfg random_model_cfg_from_json(const json& j) {
  detail::check_keys(j,
                     {"min_layers", "max_layers", "shortcut_probability", "input_hw", "input_ch",
                      "channels", "fc_units", "bn_probability", "act_probability",
                      "pool_probability", "tail_probability"},
                     {}, "corpus config");
  RandomModelCfg c;
  if (j.contains("min_layers")) c.min_layers = j.at("min_layers").get<int>();
  if (j.contains("max_layers")) c.max_layers = j.at("max_layers").get<int>();
  if (j.contains("shortcut_probability"))
    c.shortcut_probability = j.at("shortcut_probability").get<double>();
  if (j.contains("input_hw")) c.input_hw = dim_range_from_json(j.at("input_hw"));
  if (j.contains("input_ch")) c.input_ch = dim_range_from_json(j.at("input_ch"));
  if (j.contains("channels")) c.channels = dim_range_from_json(j.at("channels"));
  if (j.contains("fc_units")) c.fc_units = dim_range_from_json(j.at("fc_units"));
  if (j.contains("bn_probability")) c.bn_probability = j.at("bn_probability").get<double>();
  if (j.contains("act_probability")) c.act_probability = j.at("act_probability").get<double>();
  if (j.contains("pool_probability")) c.pool_probability = j.at("pool_probability").get<double>();
  if (j.contains("tail_probability")) c.tail_probability = j.at("tail_probability").get<double>();
  return c;
}

// Everything a run needs; a config file plus the version string reproduces
// any command's outputs bit for bit.
struct RunConfig {
  MemoryConfig mem;
  NoiseProfile noise;
  RandomModelCfg corpus;
  TrainHyper train;
  std::uint64_t seed = 1;
};

inline json to_json(const RunConfig& c) {
  return json{{"mem", to_json(c.mem)},
              {"noise", to_json(c.noise)},
              {"corpus", to_json(c.corpus)},
              {"train", to_json(c.train)},
              {"seed", c.seed}};
}

inline RunConfig run_config_from_json(const json& j) {
  detail::check_keys(j, {"mem", "noise", "corpus", "train", "seed"}, {}, "run config");
  RunConfig c;
  if (j.contains("mem")) c.mem = memory_config_from_json(j.at("mem"));
  if (j.contains("noise")) c.noise = noise_profile_from_json(j.at("noise"));
  if (j.contains("corpus")) c.corpus = random_model_cfg_from_json(j.at("corpus"));
  if (j.contains("train")) c.train = train_hyper_from_json(j.at("train"));
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

// short provenance digest of the effective config + tool version
inline std::string config_digest(const RunConfig& c) {
  const std::uint64_t h = rng::fnv1a(to_json(c).dump() + kVersion);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace umx
