#pragma once

#include <vector>

#include <Eigen/Dense>

#include "umx/classifier.hpp"
#include "umx/error.hpp"
#include "umx/features.hpp"
#include "umx/lowering.hpp"
#include "umx/sim.hpp"

namespace umx {

inline std::vector<Token> argmax_tokens(const Eigen::MatrixXd& posteriors) {
  std::vector<Token> out;
  out.reserve(static_cast<std::size_t>(posteriors.rows()));
  for (Eigen::Index t = 0; t < posteriors.rows(); ++t) {
    Eigen::Index arg;
    posteriors.row(t).maxCoeff(&arg);
    out.push_back(static_cast<Token>(arg));
  }
  return out;
}

// Greedy decode: per-kernel argmax, then collapse. CONT is the separator, so
// adjacent layers of the same type survive.
inline std::vector<LayerType> decode(const Eigen::MatrixXd& posteriors) {
  return collapse(argmax_tokens(posteriors));
}

struct DimEstimate {
  int layer_ordinal = 0;  // position in the predicted sequence
  LayerType type = LayerType::Conv;
  double filter_bytes_est = 0.0;
  double io_bytes_est = 0.0;
};

// Per predicted CONV/FC layer: migrated bytes reveal the filter size, the
// compute kernel's L2 read traffic estimates the layer input size.
inline std::vector<DimEstimate> estimate_dims(const Trace& trace,
                                              const std::vector<Token>& tokens) {
  std::vector<DimEstimate> out;
  const std::size_t n = std::min(trace.records.size(), tokens.size());
  int ordinal = -1;
  std::size_t i = 0;
  while (i < n) {
    if (tokens[i] == Token::Cont) {  // leading CONT: no open layer
      ++i;
      continue;
    }
    const Token head = tokens[i];
    ++ordinal;
    std::size_t j = i + 1;
    while (j < n && tokens[j] == Token::Cont) ++j;
    if (head == Token::Conv || head == Token::Fc) {
      DimEstimate est;
      est.layer_ordinal = ordinal;
      est.type = to_layer_type(head);
      double max_read = -1.0;
      for (std::size_t k = i; k < j; ++k) {
        est.filter_bytes_est += trace.records[k].hints.migsize_bytes;
        if (trace.records[k].hints.l2_read_bytes > max_read) {
          max_read = trace.records[k].hints.l2_read_bytes;
          est.io_bytes_est = trace.records[k].hints.l2_read_bytes;
        }
      }
      out.push_back(est);
    }
    i = j;
  }
  return out;
}

struct ExtractionResult {
  std::vector<LayerType> sequence;  // predicted L, no CONT
  Eigen::MatrixXd posteriors;       // kernels x alphabet
  std::vector<DimEstimate> dims;
};

inline ExtractionResult extract(const SequenceClassifier& clf, const Trace& trace) {
  if (trace.records.empty()) throw EmptyTrace();
  const Eigen::MatrixXd fm = featurize(trace, clf.hints(), clf.stats());
  ExtractionResult res;
  res.posteriors = clf.forward(fm);
  const std::vector<Token> tokens = argmax_tokens(res.posteriors);
  res.sequence = collapse(tokens);
  res.dims = estimate_dims(trace, tokens);
  return res;
}

inline json to_json(const ExtractionResult& r) {
  json seq = json::array();
  for (LayerType t : r.sequence) seq.push_back(to_string(t));
  json dims = json::array();
  for (const auto& d : r.dims)
    dims.push_back(json{{"layer_ordinal", d.layer_ordinal},
                        {"type", to_string(d.type)},
                        {"filter_bytes_est", d.filter_bytes_est},
                        {"io_bytes_est", d.io_bytes_est}});
  return json{{"sequence", seq}, {"dim_estimates", dims}};
}

}  // namespace umx
