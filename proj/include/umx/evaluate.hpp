#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "umx/error.hpp"
#include "umx/extract.hpp"
#include "umx/model.hpp"
#include "umx/sim.hpp"
#include "umx/util.hpp"
#include "umx/zoo.hpp"

namespace umx {

// Levenshtein distance with unit-cost insert/substitute/delete.
inline int edit_distance(std::span<const LayerType> a, std::span<const LayerType> b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

inline int edit_distance(const std::vector<LayerType>& a, const std::vector<LayerType>& b) {
  return edit_distance(std::span<const LayerType>(a), std::span<const LayerType>(b));
}

// Layer Sequence Accuracy: 1 - ED(pred, truth) / |truth|. Negative when the
// prediction is much longer than the truth; never clamped.
inline double lsa(std::span<const LayerType> pred, std::span<const LayerType> truth) {
  if (truth.empty()) throw EmptyTruth();
  return 1.0 - static_cast<double>(edit_distance(pred, truth)) /
                   static_cast<double>(truth.size());
}

inline double lsa(const std::vector<LayerType>& pred, const std::vector<LayerType>& truth) {
  return lsa(std::span<const LayerType>(pred), std::span<const LayerType>(truth));
}

struct BenchmarkCell {
  std::string model;
  std::string hint_set;
  std::vector<double> run_lsa;

  double mean() const {
    double s = 0.0;
    for (double v : run_lsa) s += v;
    return run_lsa.empty() ? 0.0 : s / static_cast<double>(run_lsa.size());
  }
  double stddev() const {
    if (run_lsa.empty()) return 0.0;
    const double m = mean();
    double acc = 0.0;
    for (double v : run_lsa) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(run_lsa.size()));
  }
};

struct BenchmarkReport {
  std::vector<BenchmarkCell> cells;
  std::vector<std::string> hint_sets;

  const BenchmarkCell& cell(const std::string& model, const std::string& hs) const {
    for (const auto& c : cells)
      if (c.model == model && c.hint_set == hs) return c;
    throw Error("no benchmark cell for " + model + "/" + hs);
  }

  // mean over the models of a group, per hint set
  double group_mean(const std::string& hs, const std::vector<std::string>& models) const {
    double s = 0.0;
    for (const auto& m : models) s += cell(m, hs).mean();
    return models.empty() ? 0.0 : s / static_cast<double>(models.size());
  }
};

inline std::vector<std::string> seq_models(const std::vector<std::string>& suite) {
  std::vector<std::string> out;
  for (const auto& m : suite)
    if (is_sequential_benchmark(m)) out.push_back(m);
  return out;
}

inline std::vector<std::string> non_seq_models(const std::vector<std::string>& suite) {
  std::vector<std::string> out;
  for (const auto& m : suite)
    if (!is_sequential_benchmark(m)) out.push_back(m);
  return out;
}

// Simulates `runs` traces per model (one trace set shared by all hint sets),
// extracts with each hint set's classifier and scores LSA against the
// catalog ground truth. Cells parallelize over models; per-cell seeds derive
// from the root seed, so neither worker count nor suite order changes them.
inline BenchmarkReport run_benchmark(const std::vector<std::string>& suite,
                                     const std::vector<std::string>& hint_sets,
                                     const std::map<std::string, SequenceClassifier>& clf_per_set,
                                     int runs, const MemoryConfig& mem, const NoiseProfile& noise,
                                     std::uint64_t root_seed) {
  for (const auto& hs : hint_sets)
    if (!clf_per_set.count(hs)) throw MissingCheckpoint("no classifier for hint set " + hs);

  BenchmarkReport rep;
  rep.hint_sets = hint_sets;
  rep.cells.resize(suite.size() * hint_sets.size());

  parallel_for(suite.size(), [&](std::size_t mi) {
    const std::string& name = suite[mi];
    const ModelSpec spec = build_benchmark(name);
    const KernelSequence seq = lower_to_kernels(spec);
    const std::vector<LayerType> truth = spec.layer_types();
    for (std::size_t hi = 0; hi < hint_sets.size(); ++hi) {
      BenchmarkCell& cell = rep.cells[mi * hint_sets.size() + hi];
      cell.model = name;
      cell.hint_set = hint_sets[hi];
    }
    for (int run = 0; run < runs; ++run) {
      const Trace tr = simulate_run(
          seq, mem, noise, rng::derive_seed(root_seed, "bench:" + name, static_cast<std::uint64_t>(run)));
      for (std::size_t hi = 0; hi < hint_sets.size(); ++hi) {
        const ExtractionResult res = extract(clf_per_set.at(hint_sets[hi]), tr);
        rep.cells[mi * hint_sets.size() + hi].run_lsa.push_back(lsa(res.sequence, truth));
      }
    }
  });
  return rep;
}

inline std::string benchmark_runs_csv(const BenchmarkReport& rep) {
  std::ostringstream os;
  os << "model,hint_set,run,lsa\n";
  for (const auto& c : rep.cells)
    for (std::size_t r = 0; r < c.run_lsa.size(); ++r)
      os << c.model << "," << c.hint_set << "," << r << "," << c.run_lsa[r] << "\n";
  return os.str();
}

inline std::string benchmark_summary_csv(const BenchmarkReport& rep,
                                         const std::vector<std::string>& suite) {
  std::ostringstream os;
  os << "group";
  for (const auto& hs : rep.hint_sets) os << "," << hs;
  os << "\n";
  const std::vector<std::pair<std::string, std::vector<std::string>>> groups = {
      {"seq_nets", seq_models(suite)},
      {"non_seq_nets", non_seq_models(suite)},
      {"all_nets", suite}};
  for (const auto& [label, models] : groups) {
    if (models.empty()) continue;
    os << label;
    for (const auto& hs : rep.hint_sets) os << "," << rep.group_mean(hs, models);
    os << "\n";
  }
  for (const auto& m : suite) {
    os << m;
    for (const auto& hs : rep.hint_sets) os << "," << rep.cell(m, hs).mean();
    os << "\n";
  }
  return os.str();
}

}  // namespace umx
