#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "umx/error.hpp"

namespace umx {

using json = nlohmann::json;

enum class LayerType { Conv, Fc, Bn, Act, PoolMax, PoolAvg, Shortcut };

constexpr std::array<LayerType, 7> kLayerTypes = {
    LayerType::Conv,   LayerType::Fc,      LayerType::Bn,      LayerType::Act,
    LayerType::PoolMax, LayerType::PoolAvg, LayerType::Shortcut};

inline const char* to_string(LayerType t) {
  switch (t) {
    case LayerType::Conv:     return "CONV";
    case LayerType::Fc:       return "FC";
    case LayerType::Bn:       return "BN";
    case LayerType::Act:      return "ACT";
    case LayerType::PoolMax:  return "POOL_MAX";
    case LayerType::PoolAvg:  return "POOL_AVG";
    case LayerType::Shortcut: return "SHORTCUT";
  }
  return "?";
}

inline LayerType layer_type_from_string(const std::string& s) {
  for (LayerType t : kLayerTypes)
    if (s == to_string(t)) return t;
  throw ParseError("unknown layer type: " + s);
}

struct Dims {
  std::int64_t c = 1, h = 1, w = 1;
  std::int64_t elems() const { return c * h * w; }
  bool operator==(const Dims&) const = default;
};

struct FilterDims {
  std::int64_t ci = 1, kh = 1, kw = 1, co = 1;
  std::int64_t elems() const { return ci * kh * kw * co; }
  bool operator==(const FilterDims&) const = default;
};

struct LayerSpec {
  int index = 0;
  LayerType type = LayerType::Conv;
  Dims ifm;
  Dims ofm;
  std::optional<FilterDims> filter;
  int stride = 0;
  int pad = 0;
  std::optional<int> shortcut_from;

  bool operator==(const LayerSpec&) const = default;
};

struct ModelSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  int element_bytes = 4;

  bool operator==(const ModelSpec&) const = default;

  std::vector<LayerType> layer_types() const {
    std::vector<LayerType> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back(l.type);
    return out;
  }
};

struct Violation {
  int layer = -1;
  std::string what;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const {
    std::ostringstream os;
    for (const auto& v : violations)
      os << "layer " << v.layer << ": " << v.what << "\n";
    return os.str();
  }
};

// Checks every structural invariant: filter presence rules, dimension
// chaining, shortcut targets, positivity. Violations are data, not errors.
inline ValidationReport validate_model(const ModelSpec& spec) {
  ValidationReport rep;
  auto bad = [&](int layer, std::string what) {
    rep.violations.push_back({layer, std::move(what)});
  };

  if (spec.layers.empty()) {
    bad(-1, "model has no layers");
    return rep;
  }
  if (spec.element_bytes < 1) bad(-1, "element_bytes must be >= 1");

  bool has_linear = false;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const int li = static_cast<int>(i);
    if (l.index != li) bad(li, "index does not match position");

    if (l.ifm.c < 1 || l.ifm.h < 1 || l.ifm.w < 1) bad(li, "ifm dims must be >= 1");
    if (l.ofm.c < 1 || l.ofm.h < 1 || l.ofm.w < 1) bad(li, "ofm dims must be >= 1");

    const bool linear = l.type == LayerType::Conv || l.type == LayerType::Fc;
    has_linear = has_linear || linear;
    if (linear && !l.filter) bad(li, "CONV/FC layer missing filter dims");
    if (!linear && l.filter) bad(li, "filter dims only valid for CONV/FC");

    if (l.filter) {
      const FilterDims& f = *l.filter;
      if (f.ci < 1 || f.kh < 1 || f.kw < 1 || f.co < 1) bad(li, "filter dims must be >= 1");
      if (f.co != l.ofm.c) bad(li, "filter out channels != ofm channels");
      if (l.type == LayerType::Conv) {
        if (f.ci != l.ifm.c) bad(li, "filter in channels != ifm channels");
        if (l.stride >= 1) {
          const std::int64_t oh = (l.ifm.h + 2 * l.pad - f.kh) / l.stride + 1;
          const std::int64_t ow = (l.ifm.w + 2 * l.pad - f.kw) / l.stride + 1;
          if (oh != l.ofm.h || ow != l.ofm.w) bad(li, "conv ofm does not match window arithmetic");
        } else {
          bad(li, "conv stride must be >= 1");
        }
      }
      if (l.type == LayerType::Fc) {
        if (f.kh != 1 || f.kw != 1) bad(li, "FC filter must be 1x1");
        if (l.ofm.h != 1 || l.ofm.w != 1) bad(li, "FC ofm spatial dims must be 1x1");
        if (f.ci != l.ifm.elems()) bad(li, "FC filter in size != flattened ifm");
      }
    }

    if (l.type == LayerType::Shortcut) {
      if (!l.shortcut_from) {
        bad(li, "SHORTCUT missing source");
      } else {
        const int src = *l.shortcut_from;
        if (src < 0 || src >= li) {
          bad(li, "SHORTCUT source must be an earlier layer");
        } else if (spec.layers[src].ofm != l.ofm) {
          bad(li, "SHORTCUT source ofm dims differ");
        }
      }
    } else if (l.shortcut_from) {
      bad(li, "shortcut_from only valid for SHORTCUT");
    }

    if (l.type == LayerType::Bn || l.type == LayerType::Act ||
        l.type == LayerType::Shortcut) {
      if (l.ofm != l.ifm) bad(li, "in-place layer must keep ifm dims");
    }
    if (l.type == LayerType::PoolMax || l.type == LayerType::PoolAvg) {
      if (l.ofm.c != l.ifm.c) bad(li, "pool must keep channel count");
      if (l.ofm.h > l.ifm.h || l.ofm.w > l.ifm.w) bad(li, "pool cannot upsample");
    }

    if (i > 0 && l.ifm != spec.layers[i - 1].ofm)
      bad(li, "ifm dims != previous layer ofm dims");
  }
  if (!has_linear) bad(-1, "model must contain at least one CONV or FC layer");
  return rep;
}

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::set<std::string>& required, const std::string& ctx) {
  if (!j.is_object()) throw ParseError(ctx + ": expected object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ParseError(ctx + ": unknown field '" + key + "'");
  for (const auto& key : required)
    if (!j.contains(key)) throw ParseError(ctx + ": missing field '" + key + "'");
}

inline Dims dims_from_json(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3) throw ParseError(ctx + ": expected [c,h,w]");
  return Dims{j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>()};
}

}  // namespace detail

inline json to_json(const LayerSpec& l) {
  json j;
  j["index"] = l.index;
  j["type"] = to_string(l.type);
  j["ifm"] = {l.ifm.c, l.ifm.h, l.ifm.w};
  j["ofm"] = {l.ofm.c, l.ofm.h, l.ofm.w};
  if (l.filter) j["filter"] = {l.filter->ci, l.filter->kh, l.filter->kw, l.filter->co};
  if (l.stride > 0) j["stride"] = l.stride;
  if (l.pad > 0) j["pad"] = l.pad;
  if (l.shortcut_from) j["shortcut_from"] = *l.shortcut_from;
  return j;
}

inline json to_json(const ModelSpec& m) {
  json j;
  j["name"] = m.name;
  j["element_bytes"] = m.element_bytes;
  json arr = json::array();
  for (const auto& l : m.layers) arr.push_back(to_json(l));
  j["layers"] = arr;
  return j;
}

inline LayerSpec layer_from_json(const json& j) {
  detail::check_keys(j,
                     {"index", "type", "ifm", "ofm", "filter", "stride", "pad", "shortcut_from"},
                     {"index", "type", "ifm", "ofm"}, "layer");
  LayerSpec l;
  l.index = j.at("index").get<int>();
  l.type = layer_type_from_string(j.at("type").get<std::string>());
  l.ifm = detail::dims_from_json(j.at("ifm"), "ifm");
  l.ofm = detail::dims_from_json(j.at("ofm"), "ofm");
  if (j.contains("filter")) {
    const json& f = j.at("filter");
    if (!f.is_array() || f.size() != 4) throw ParseError("filter: expected [ci,kh,kw,co]");
    l.filter = FilterDims{f[0].get<std::int64_t>(), f[1].get<std::int64_t>(),
                          f[2].get<std::int64_t>(), f[3].get<std::int64_t>()};
  }
  if (j.contains("stride")) l.stride = j.at("stride").get<int>();
  if (j.contains("pad")) l.pad = j.at("pad").get<int>();
  if (j.contains("shortcut_from")) l.shortcut_from = j.at("shortcut_from").get<int>();
  return l;
}

inline ModelSpec model_from_json(const json& j) {
  detail::check_keys(j, {"name", "element_bytes", "layers"}, {"name", "layers"}, "model");
  ModelSpec m;
  m.name = j.at("name").get<std::string>();
  if (j.contains("element_bytes")) m.element_bytes = j.at("element_bytes").get<int>();
  for (const auto& lj : j.at("layers")) m.layers.push_back(layer_from_json(lj));
  return m;
}

inline void save_model(const ModelSpec& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for write: " + path);
  out << to_json(m).dump(2) << "\n";
}

inline ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace umx
