#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "umx/error.hpp"
#include "umx/sim.hpp"

namespace umx {

struct StatSummary {
  double mean = 0.0;
  double stddev = 0.0;     // population
  double cov = 0.0;        // stddev / mean, valid only when defined
  bool cov_defined = false;  // false when mean == 0
};

inline StatSummary cov(std::span<const double> series) {
  if (series.empty()) throw EmptySeries();
  StatSummary s;
  for (double v : series) s.mean += v;
  s.mean /= static_cast<double>(series.size());
  double acc = 0.0;
  for (double v : series) acc += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(acc / static_cast<double>(series.size()));
  if (s.mean != 0.0) {
    s.cov = s.stddev / s.mean;
    s.cov_defined = true;
  }
  return s;
}

inline StatSummary cov(const std::vector<double>& series) {
  return cov(std::span<const double>(series));
}

// CoV of the hint across layers (one value per layer). Layers where the hint
// is zero stay in the series: a hint that fires on few layers is by that very
// fact highly distinguishable.
inline double distinguishability(std::span<const double> per_layer_means) {
  if (per_layer_means.size() < 2) throw TooFewLayers();
  StatSummary s = cov(per_layer_means);
  return s.cov_defined ? s.cov : 0.0;
}

inline double distinguishability(const std::vector<double>& v) {
  return distinguishability(std::span<const double>(v));
}

enum class ConAggregate { Mean, Median };

struct ConsistencyResult {
  double cov_con = 0.0;
  int undefined_layers = 0;  // layers whose mean is zero (CoV undefined there)
};

// Per-layer CoV across runs, aggregated over the layers where it is defined.
// samples[layer][run].
inline ConsistencyResult consistency(const std::vector<std::vector<double>>& samples,
                                     ConAggregate agg = ConAggregate::Mean) {
  std::vector<double> per_layer;
  int undefined = 0;
  for (const auto& runs : samples) {
    if (runs.size() < 2) throw TooFewRuns();
    StatSummary s = cov(runs);
    if (s.cov_defined)
      per_layer.push_back(s.cov);
    else
      ++undefined;
  }
  ConsistencyResult res;
  res.undefined_layers = undefined;
  if (per_layer.empty()) return res;
  if (agg == ConAggregate::Mean) {
    for (double c : per_layer) res.cov_con += c;
    res.cov_con /= static_cast<double>(per_layer.size());
  } else {
    std::sort(per_layer.begin(), per_layer.end());
    const std::size_t n = per_layer.size();
    res.cov_con = n % 2 ? per_layer[n / 2] : 0.5 * (per_layer[n / 2 - 1] + per_layer[n / 2]);
  }
  return res;
}

constexpr double kArchEsEpsilon = 1e-9;

inline double arch_es(double cov_dis, double cov_con) {
  return cov_dis / std::max(cov_con, kArchEsEpsilon);
}

enum class DisSource { LayerMeans, PooledSamples };

struct ArchESOptions {
  ConAggregate con_aggregate = ConAggregate::Mean;
  DisSource dis_source = DisSource::LayerMeans;
};

struct HintScore {
  double cov_dis = 0.0;
  double cov_con = 0.0;
  double arch_es = 0.0;
  int con_undefined_layers = 0;
  bool epsilon_clamped = false;
};

struct ArchESReport {
  std::map<Hint, HintScore> scores;
  double epsilon = kArchEsEpsilon;

  // hints ordered by descending effectiveness
  std::vector<Hint> ranking() const {
    std::vector<Hint> order(kAllHints.begin(), kAllHints.end());
    std::sort(order.begin(), order.end(), [&](Hint a, Hint b) {
      return scores.at(a).arch_es > scores.at(b).arch_es;
    });
    return order;
  }
};

// Groups trace records by layer (summing kernels of one layer), then scores
// every hint: distinguishability over per-layer means, consistency over runs.
inline ArchESReport score_report(const std::vector<Trace>& traces,
                                 const ArchESOptions& opts = {}) {
  if (traces.size() < 2) throw TooFewRuns();
  const std::size_t kernels = traces.front().records.size();
  const std::string& model = traces.front().model_name;
  for (const auto& tr : traces) {
    if (tr.model_name != model)
      throw MixedModels("traces mix models: " + model + " vs " + tr.model_name);
    if (tr.records.size() != kernels)
      throw MixedModels("traces disagree on kernel count");
  }

  const int layers = traces.front().layer_count();
  ArchESReport rep;

  for (Hint h : kAllHints) {
    // per_layer[layer][run] = sum of the hint over that layer's kernels
    std::vector<std::vector<double>> per_layer(
        static_cast<std::size_t>(layers),
        std::vector<double>(traces.size(), 0.0));
    for (std::size_t run = 0; run < traces.size(); ++run)
      for (const auto& rec : traces[run].records)
        per_layer[static_cast<std::size_t>(rec.layer_index)][run] += rec.hints[h];

    HintScore score;

    if (layers >= 2) {
      std::vector<double> series;
      series.reserve(per_layer.size());
      if (opts.dis_source == DisSource::LayerMeans) {
        for (const auto& runs : per_layer) {
          double m = 0.0;
          for (double v : runs) m += v;
          series.push_back(m / static_cast<double>(runs.size()));
        }
      } else {
        for (const auto& runs : per_layer)
          for (double v : runs) series.push_back(v);
      }
      score.cov_dis = distinguishability(series);
    }

    ConsistencyResult con = consistency(per_layer, opts.con_aggregate);
    score.cov_con = con.cov_con;
    score.con_undefined_layers = con.undefined_layers;
    score.epsilon_clamped = score.cov_con < kArchEsEpsilon;
    score.arch_es = arch_es(score.cov_dis, score.cov_con);
    rep.scores[h] = score;
  }
  return rep;
}

inline std::string archs_report_csv(const ArchESReport& rep) {
  std::ostringstream os;
  os << "hint,cov_dis,cov_con,arch_es,undefined_layers,epsilon_clamped\n";
  for (Hint h : rep.ranking()) {
    const HintScore& s = rep.scores.at(h);
    os << to_string(h) << "," << s.cov_dis << "," << s.cov_con << "," << s.arch_es << ","
       << s.con_undefined_layers << "," << (s.epsilon_clamped ? 1 : 0) << "\n";
  }
  return os.str();
}

}  // namespace umx
