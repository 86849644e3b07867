#pragma once

#include <array>
#include <cassert>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "umx/error.hpp"
#include "umx/lowering.hpp"
#include "umx/model.hpp"
#include "umx/rng.hpp"

namespace umx {

// The eight candidate Arch-hints collected per kernel. The first five form
// the extractor's feature vector; the DRAM pair and kernel latency exist for
// the effectiveness ranking.
enum class Hint {
  PFLat, MigLat, MigSize, L2Read, L2Write, DRAMRead, DRAMWrite, KernelLat
};

constexpr std::array<Hint, 8> kAllHints = {
    Hint::PFLat,    Hint::MigLat,   Hint::MigSize,   Hint::L2Read,
    Hint::L2Write,  Hint::DRAMRead, Hint::DRAMWrite, Hint::KernelLat};

inline const char* to_string(Hint h) {
  switch (h) {
    case Hint::PFLat:     return "pflat";
    case Hint::MigLat:    return "miglat";
    case Hint::MigSize:   return "migsize";
    case Hint::L2Read:    return "l2_read";
    case Hint::L2Write:   return "l2_write";
    case Hint::DRAMRead:  return "dram_read";
    case Hint::DRAMWrite: return "dram_write";
    case Hint::KernelLat: return "kernel_lat";
  }
  return "?";
}

inline Hint hint_from_string(const std::string& s) {
  for (Hint h : kAllHints)
    if (s == to_string(h)) return h;
  throw ParseError("unknown hint: " + s);
}

struct ArchHintVector {
  double pflat_us = 0.0;
  double miglat_us = 0.0;
  double migsize_bytes = 0.0;
  double l2_read_bytes = 0.0;
  double l2_write_bytes = 0.0;
  double dram_read_bytes = 0.0;
  double dram_write_bytes = 0.0;
  double kernel_lat_us = 0.0;

  double& operator[](Hint h) {
    switch (h) {
      case Hint::PFLat:     return pflat_us;
      case Hint::MigLat:    return miglat_us;
      case Hint::MigSize:   return migsize_bytes;
      case Hint::L2Read:    return l2_read_bytes;
      case Hint::L2Write:   return l2_write_bytes;
      case Hint::DRAMRead:  return dram_read_bytes;
      case Hint::DRAMWrite: return dram_write_bytes;
      case Hint::KernelLat: return kernel_lat_us;
    }
    return pflat_us;
  }
  double operator[](Hint h) const { return const_cast<ArchHintVector&>(*this)[h]; }
};

// UM memory-system model. Defaults approximate a PCIe-attached discrete GPU
// with 64 KiB migration granularity; latency constants are calibrated so the
// per-layer hint dispersion of the reference model lands near the published
// characterization.
struct MemoryConfig {
  std::int64_t page_bytes = 65536;
  double fault_service_us = 10.0;        // batch overhead per faulting kernel
  double per_page_fault_us = 2.0;        // added per faulted page
  double migration_bandwidth_bytes_per_us = 12000.0;
  std::int64_t l2_capacity_bytes = 1 << 20;
  double base_kernel_us_per_flop_scale = 1.5e-4;
  std::int64_t dram_base_bytes_per_kernel = 768 << 10;  // cold-miss floor

  void check() const {
    if (page_bytes <= 0 || fault_service_us <= 0 || per_page_fault_us <= 0 ||
        migration_bandwidth_bytes_per_us <= 0 || l2_capacity_bytes <= 0 ||
        base_kernel_us_per_flop_scale <= 0 || dram_base_bytes_per_kernel <= 0)
      throw ConfigError("memory config fields must be strictly positive");
  }

  std::int64_t page_count(std::int64_t bytes) const {
    return (bytes + page_bytes - 1) / page_bytes;
  }
  std::int64_t page_align(std::int64_t bytes) const {
    return page_count(bytes) * page_bytes;
  }
};

// Per-hint relative standard deviation of the multiplicative lognormal noise.
// Defaults follow the published per-hint run-to-run consistency figures.
struct NoiseProfile {
  std::array<double, 8> cov{};
  bool measurement_floor = false;  // additive floor to stress the extractor
  double floor_us = 0.5;
  double floor_bytes = 1024.0;

  NoiseProfile() {
    set(Hint::PFLat, 0.095);
    set(Hint::MigLat, 0.012);
    set(Hint::MigSize, 0.0081);
    set(Hint::L2Read, 0.46);
    set(Hint::L2Write, 0.0017);
    set(Hint::DRAMRead, 0.51);
    set(Hint::DRAMWrite, 0.22);
    set(Hint::KernelLat, 0.11);
  }

  static NoiseProfile zero() {
    NoiseProfile p;
    p.cov.fill(0.0);
    return p;
  }

  void set(Hint h, double c) { cov[static_cast<std::size_t>(h)] = c; }
  double get(Hint h) const { return cov[static_cast<std::size_t>(h)]; }

  void check() const {
    for (double c : cov)
      if (c < 0.0) throw ConfigError("noise CoV must be >= 0");
  }
};

struct Footprint {
  std::int64_t ofm_bytes = 0;
  std::int64_t filter_bytes = 0;
};

inline Footprint footprint(const LayerSpec& layer, int element_bytes) {
  Footprint f;
  f.ofm_bytes = layer.ofm.elems() * element_bytes;
  if (layer.filter) f.filter_bytes = layer.filter->elems() * element_bytes;
  return f;
}

struct TraceRecord {
  int position = 0;
  std::string kernel_name;
  int layer_index = 0;
  Token truth_label = Token::Cont;
  ArchHintVector hints;
};

struct Trace {
  std::string model_name;
  std::uint64_t run_seed = 0;
  MemoryConfig mem;
  NoiseProfile noise;
  std::vector<TraceRecord> records;

  int layer_count() const {
    int n = 0;
    for (const auto& r : records) n = std::max(n, r.layer_index + 1);
    return n;
  }
};

// One simulated UM execution of the kernel sequence. Pages are lazily
// allocated: first-touch accesses fault, filter first-touch reads migrate
// host-resident data, everything already resident is free. Deterministic for
// a fixed seed.
inline Trace simulate_run(const KernelSequence& seq, const MemoryConfig& mem,
                          const NoiseProfile& noise, std::uint64_t seed) {
  mem.check();
  noise.check();

  Trace tr;
  tr.model_name = seq.model.name;
  tr.run_seed = seed;
  tr.mem = mem;
  tr.noise = noise;
  tr.records.reserve(seq.kernels.size());

  // one noise factor per (layer, hint) per run: kernels of one layer see the
  // same execution conditions, which keeps per-layer run-to-run variation at
  // the profile's CoV
  const std::size_t layers = seq.model.layers.size();
  std::vector<std::array<double, 8>> factor(layers);
  rng::Rand rnd(rng::derive_seed(seed, "um-noise"));
  for (std::size_t li = 0; li < layers; ++li)
    for (Hint h : kAllHints)
      factor[li][static_cast<std::size_t>(h)] = rnd.lognormal_factor(noise.get(h));

  // resident set starts empty (lazy allocation); the lowering's first_touch
  // flags must agree with it at every access
  std::vector<bool> resident(seq.regions.size(), false);
  for (const auto& r : seq.regions)
    if (r.kind == RegionKind::Ifm) resident[static_cast<std::size_t>(r.id)] = true;

  for (const auto& ev : seq.kernels) {
    ArchHintVector v;

    std::int64_t faulted_pages = 0;
    std::int64_t migrated_bytes = 0;
    double read_bytes = 0.0;
    double written_bytes = 0.0;

    auto touch = [&](const Access& acc) {
      assert(acc.first_touch == !resident[static_cast<std::size_t>(acc.region)]);
      resident[static_cast<std::size_t>(acc.region)] = true;
    };

    for (const auto& acc : ev.reads) {
      const MemRegion& r = seq.region(acc.region);
      read_bytes += static_cast<double>(r.bytes);
      if (acc.first_touch) {
        faulted_pages += mem.page_count(r.bytes);
        if (r.kind == RegionKind::Filter) migrated_bytes += mem.page_align(r.bytes);
      }
      touch(acc);
    }
    for (const auto& acc : ev.writes) {
      const MemRegion& r = seq.region(acc.region);
      written_bytes += static_cast<double>(r.bytes);
      if (acc.first_touch) faulted_pages += mem.page_count(r.bytes);
      touch(acc);
    }

    if (faulted_pages > 0)
      v.pflat_us = mem.fault_service_us +
                   mem.per_page_fault_us * static_cast<double>(faulted_pages);
    if (migrated_bytes > 0) {
      v.migsize_bytes = static_cast<double>(migrated_bytes);
      v.miglat_us = static_cast<double>(migrated_bytes) / mem.migration_bandwidth_bytes_per_us +
                    mem.per_page_fault_us * static_cast<double>(migrated_bytes / mem.page_bytes);
    }

    const double cap = static_cast<double>(mem.l2_capacity_bytes);
    const double base = static_cast<double>(mem.dram_base_bytes_per_kernel);
    v.l2_read_bytes = read_bytes;
    v.l2_write_bytes = std::min(written_bytes, cap);
    v.dram_read_bytes = std::max(read_bytes - cap, 0.0) + base;
    v.dram_write_bytes = std::max(written_bytes - cap, 0.0) + base;

    v.kernel_lat_us = mem.base_kernel_us_per_flop_scale * ev.flop_scale +
                      v.pflat_us + v.miglat_us;

    const auto& f = factor[static_cast<std::size_t>(ev.layer_index)];
    for (Hint h : kAllHints) v[h] *= f[static_cast<std::size_t>(h)];

    if (noise.measurement_floor) {
      v.pflat_us += noise.floor_us;
      v.miglat_us += noise.floor_us;
      v.kernel_lat_us += noise.floor_us;
      v.migsize_bytes += noise.floor_bytes;
      v.l2_read_bytes += noise.floor_bytes;
      v.l2_write_bytes += noise.floor_bytes;
    }

    tr.records.push_back({ev.position, ev.kernel_name, ev.layer_index, ev.truth_label, v});
  }
  return tr;
}

inline std::vector<Trace> simulate_samples(const KernelSequence& seq, const MemoryConfig& mem,
                                           const NoiseProfile& noise, std::uint64_t base_seed,
                                           int runs) {
  if (runs < 1) throw ConfigError("runs must be >= 1");
  std::vector<Trace> out;
  out.reserve(static_cast<std::size_t>(runs));
  for (int i = 0; i < runs; ++i)
    out.push_back(simulate_run(seq, mem, noise, base_seed + static_cast<std::uint64_t>(i)));
  return out;
}

// ---- config / trace serialization ----

inline json to_json(const MemoryConfig& m) {
  return json{{"page_bytes", m.page_bytes},
              {"fault_service_us", m.fault_service_us},
              {"per_page_fault_us", m.per_page_fault_us},
              {"migration_bandwidth_bytes_per_us", m.migration_bandwidth_bytes_per_us},
              {"l2_capacity_bytes", m.l2_capacity_bytes},
              {"base_kernel_us_per_flop_scale", m.base_kernel_us_per_flop_scale},
              {"dram_base_bytes_per_kernel", m.dram_base_bytes_per_kernel}};
}

inline MemoryConfig memory_config_from_json(const json& j) {
  detail::check_keys(j,
                     {"page_bytes", "fault_service_us", "per_page_fault_us",
                      "migration_bandwidth_bytes_per_us", "l2_capacity_bytes",
                      "base_kernel_us_per_flop_scale", "dram_base_bytes_per_kernel"},
                     {}, "mem config");
  MemoryConfig m;
  if (j.contains("page_bytes")) m.page_bytes = j.at("page_bytes").get<std::int64_t>();
  if (j.contains("fault_service_us")) m.fault_service_us = j.at("fault_service_us").get<double>();
  if (j.contains("per_page_fault_us"))
    m.per_page_fault_us = j.at("per_page_fault_us").get<double>();
  if (j.contains("migration_bandwidth_bytes_per_us"))
    m.migration_bandwidth_bytes_per_us = j.at("migration_bandwidth_bytes_per_us").get<double>();
  if (j.contains("l2_capacity_bytes"))
    m.l2_capacity_bytes = j.at("l2_capacity_bytes").get<std::int64_t>();
  if (j.contains("base_kernel_us_per_flop_scale"))
    m.base_kernel_us_per_flop_scale = j.at("base_kernel_us_per_flop_scale").get<double>();
  if (j.contains("dram_base_bytes_per_kernel"))
    m.dram_base_bytes_per_kernel = j.at("dram_base_bytes_per_kernel").get<std::int64_t>();
  return m;
}

inline json to_json(const NoiseProfile& n) {
  json cov;
  for (Hint h : kAllHints) cov[to_string(h)] = n.get(h);
  return json{{"cov", cov},
              {"measurement_floor", n.measurement_floor},
              {"floor_us", n.floor_us},
              {"floor_bytes", n.floor_bytes}};
}

inline NoiseProfile noise_profile_from_json(const json& j) {
  detail::check_keys(j, {"cov", "measurement_floor", "floor_us", "floor_bytes"}, {},
                     "noise profile");
  NoiseProfile n;
  if (j.contains("cov")) {
    for (const auto& [key, val] : j.at("cov").items())
      n.set(hint_from_string(key), val.get<double>());
  }
  if (j.contains("measurement_floor")) n.measurement_floor = j.at("measurement_floor").get<bool>();
  if (j.contains("floor_us")) n.floor_us = j.at("floor_us").get<double>();
  if (j.contains("floor_bytes")) n.floor_bytes = j.at("floor_bytes").get<double>();
  return n;
}

// JSONL: header object, then one record object per kernel.
inline void write_trace(const Trace& tr, std::ostream& out) {
  json header{{"model", tr.model_name},
              {"seed", tr.run_seed},
              {"mem_config", to_json(tr.mem)},
              {"noise_profile", to_json(tr.noise)}};
  out << header.dump() << "\n";
  for (const auto& r : tr.records) {
    json j{{"pos", r.position},
           {"kernel", r.kernel_name},
           {"layer_index", r.layer_index},
           {"truth_label", to_string(r.truth_label)},
           {"pflat_us", r.hints.pflat_us},
           {"miglat_us", r.hints.miglat_us},
           {"migsize_bytes", r.hints.migsize_bytes},
           {"l2_read_bytes", r.hints.l2_read_bytes},
           {"l2_write_bytes", r.hints.l2_write_bytes},
           {"dram_read_bytes", r.hints.dram_read_bytes},
           {"dram_write_bytes", r.hints.dram_write_bytes},
           {"kernel_lat_us", r.hints.kernel_lat_us}};
    out << j.dump() << "\n";
  }
}

inline void save_trace(const Trace& tr, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for write: " + path);
  write_trace(tr, out);
}

inline std::string trace_to_string(const Trace& tr) {
  std::ostringstream os;
  write_trace(tr, os);
  return os.str();
}

inline Trace read_trace(std::istream& in, const std::string& ctx = "trace") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(ctx + ": empty trace file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(ctx + ": bad header: " + e.what());
  }
  Trace tr;
  tr.model_name = header.at("model").get<std::string>();
  tr.run_seed = header.at("seed").get<std::uint64_t>();
  if (header.contains("mem_config")) tr.mem = memory_config_from_json(header.at("mem_config"));
  if (header.contains("noise_profile"))
    tr.noise = noise_profile_from_json(header.at("noise_profile"));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(ctx + ": bad record: " + e.what());
    }
    TraceRecord r;
    r.position = j.at("pos").get<int>();
    r.kernel_name = j.at("kernel").get<std::string>();
    r.layer_index = j.at("layer_index").get<int>();
    r.truth_label = token_from_string(j.at("truth_label").get<std::string>());
    r.hints.pflat_us = j.at("pflat_us").get<double>();
    r.hints.miglat_us = j.at("miglat_us").get<double>();
    r.hints.migsize_bytes = j.at("migsize_bytes").get<double>();
    r.hints.l2_read_bytes = j.at("l2_read_bytes").get<double>();
    r.hints.l2_write_bytes = j.at("l2_write_bytes").get<double>();
    r.hints.dram_read_bytes = j.at("dram_read_bytes").get<double>();
    r.hints.dram_write_bytes = j.at("dram_write_bytes").get<double>();
    r.hints.kernel_lat_us = j.at("kernel_lat_us").get<double>();
    tr.records.push_back(std::move(r));
  }
  return tr;
}

inline Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file: " + path);
  return read_trace(in, path);
}

}  // namespace umx
