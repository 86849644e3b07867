#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "umx/error.hpp"
#include "umx/sim.hpp"

namespace umx {

// The five hint-set ablations: PFLat alone, MigSize alone, the primary
// UM hints, the L2 pair, and their union.
struct HintSet {
  std::string id;
  std::vector<Hint> hints;
};

inline const std::vector<std::string>& hint_set_ids() {
  static const std::vector<std::string> ids = {"s1", "s2", "s3", "s4", "s5"};
  return ids;
}

inline HintSet hint_set(const std::string& id) {
  if (id == "s1") return {"s1", {Hint::PFLat}};
  if (id == "s2") return {"s2", {Hint::MigSize}};
  if (id == "s3") return {"s3", {Hint::PFLat, Hint::MigLat, Hint::MigSize}};
  if (id == "s4") return {"s4", {Hint::L2Read, Hint::L2Write}};
  if (id == "s5")
    return {"s5", {Hint::PFLat, Hint::MigLat, Hint::MigSize, Hint::L2Read, Hint::L2Write}};
  throw HintMismatch("unknown hint set: " + id);
}

// Per-column statistics of log1p(raw hint), frozen from the training corpus.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

constexpr double kFeatureClip = 8.0;

inline NormStats compute_norm_stats(const std::vector<Trace>& corpus, const HintSet& hs) {
  const std::size_t cols = hs.hints.size();
  NormStats st;
  st.mean.assign(cols, 0.0);
  st.stddev.assign(cols, 0.0);
  std::size_t rows = 0;
  for (const auto& tr : corpus) rows += tr.records.size();
  if (rows == 0) throw Error("empty corpus");

  for (const auto& tr : corpus)
    for (const auto& rec : tr.records)
      for (std::size_t c = 0; c < cols; ++c)
        st.mean[c] += std::log1p(rec.hints[hs.hints[c]]);
  for (std::size_t c = 0; c < cols; ++c) st.mean[c] /= static_cast<double>(rows);

  for (const auto& tr : corpus)
    for (const auto& rec : tr.records)
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = std::log1p(rec.hints[hs.hints[c]]) - st.mean[c];
        st.stddev[c] += d * d;
      }
  for (std::size_t c = 0; c < cols; ++c)
    st.stddev[c] = std::sqrt(st.stddev[c] / static_cast<double>(rows));
  return st;
}

// rows = kernels, cols = selected hints; log1p then z-score with corpus
// stats, clipped to +-8 standard scores. Constant columns map to zero.
inline Eigen::MatrixXd featurize(const Trace& trace, const HintSet& hs, const NormStats& stats) {
  if (stats.mean.size() != hs.hints.size() || stats.stddev.size() != hs.hints.size())
    throw HintMismatch("normalization stats were computed for a different hint set");
  const std::size_t cols = hs.hints.size();
  Eigen::MatrixXd fm(static_cast<Eigen::Index>(trace.records.size()),
                     static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < trace.records.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double v = std::log1p(trace.records[r].hints[hs.hints[c]]);
      const double sd = stats.stddev[c];
      v = sd > 1e-12 ? (v - stats.mean[c]) / sd : 0.0;
      v = std::clamp(v, -kFeatureClip, kFeatureClip);
      fm(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return fm;
}

inline json to_json(const NormStats& st) {
  return json{{"mean", st.mean}, {"stddev", st.stddev}};
}

inline NormStats norm_stats_from_json(const json& j) {
  NormStats st;
  st.mean = j.at("mean").get<std::vector<double>>();
  st.stddev = j.at("stddev").get<std::vector<double>>();
  if (st.mean.size() != st.stddev.size()) throw ParseError("norm stats size mismatch");
  return st;
}

}  // namespace umx
