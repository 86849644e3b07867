#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "umx/error.hpp"
#include "umx/model.hpp"

namespace umx {

// Extraction alphabet: the seven layer types plus the continuation token
// carried by every kernel after the first one of a layer.
enum class Token {
  Conv, Fc, Bn, Act, PoolMax, PoolAvg, Shortcut, Cont
};

constexpr int kAlphabetSize = 8;
constexpr int kContIndex = 7;

inline const char* to_string(Token t) {
  switch (t) {
    case Token::Conv:     return "CONV";
    case Token::Fc:       return "FC";
    case Token::Bn:       return "BN";
    case Token::Act:      return "ACT";
    case Token::PoolMax:  return "POOL_MAX";
    case Token::PoolAvg:  return "POOL_AVG";
    case Token::Shortcut: return "SHORTCUT";
    case Token::Cont:     return "CONT";
  }
  return "?";
}

inline Token token_from_string(const std::string& s) {
  if (s == "CONT") return Token::Cont;
  return static_cast<Token>(layer_type_from_string(s));
}

inline Token to_token(LayerType t) { return static_cast<Token>(t); }

inline LayerType to_layer_type(Token t) {
  if (t == Token::Cont) throw Error("CONT is not a layer type");
  return static_cast<LayerType>(t);
}

// Drops CONT tokens; every non-CONT position emits a layer, so adjacent
// layers of the same type survive the collapse.
inline std::vector<LayerType> collapse(const std::vector<Token>& tokens) {
  std::vector<LayerType> out;
  for (Token t : tokens)
    if (t != Token::Cont) out.push_back(to_layer_type(t));
  return out;
}

enum class RegionKind { Ifm, Ofm, Filter };

inline const char* to_string(RegionKind k) {
  switch (k) {
    case RegionKind::Ifm:    return "IFM";
    case RegionKind::Ofm:    return "OFM";
    case RegionKind::Filter: return "FILTER";
  }
  return "?";
}

struct MemRegion {
  int id = 0;
  RegionKind kind = RegionKind::Ofm;
  int owner_layer = 0;
  std::int64_t bytes = 0;
};

struct Access {
  int region = 0;
  bool first_touch = false;
};

struct KernelEvent {
  int position = 0;
  std::string kernel_name;
  int layer_index = 0;
  Token truth_label = Token::Cont;
  std::vector<Access> reads;
  std::vector<Access> writes;
  double flop_scale = 0.0;
};

struct KernelSequence {
  ModelSpec model;
  std::vector<MemRegion> regions;
  std::vector<KernelEvent> kernels;

  const MemRegion& region(int id) const { return regions[static_cast<std::size_t>(id)]; }
};

inline std::vector<Token> truth_labels(const KernelSequence& seq) {
  std::vector<Token> out;
  out.reserve(seq.kernels.size());
  for (const auto& k : seq.kernels) out.push_back(k.truth_label);
  return out;
}

namespace detail {

class Lowerer {
 public:
  explicit Lowerer(const ModelSpec& spec) { seq_.model = spec; }

  KernelSequence run() {
    const ModelSpec& m = seq_.model;

    // network input: populated by the host before the first kernel launch,
    // so accesses to it never first-touch
    const int input_region = add_region(RegionKind::Ifm, 0, m.layers[0].ifm.elems() * m.element_bytes);
    touched_[static_cast<std::size_t>(input_region)] = true;
    int cur_ofm = input_region;  // region holding the live activation

    for (const auto& l : m.layers) {
      const std::int64_t eb = m.element_bytes;
      const std::int64_t ofm_bytes = l.ofm.elems() * eb;
      const double out_elems = static_cast<double>(l.ofm.elems());
      const double in_elems = static_cast<double>(l.ifm.elems());
      first_of_layer_ = true;

      switch (l.type) {
        case LayerType::Conv: {
          const int ofm = add_region(RegionKind::Ofm, l.index, ofm_bytes);
          const int filter = add_region(RegionKind::Filter, l.index, l.filter->elems() * eb);
          const double kk = static_cast<double>(l.filter->kh * l.filter->kw);
          kernel(l, "fill_kernel", out_elems).write(ofm).done();
          kernel(l, "im2col_kernel", in_elems).read(cur_ofm).done();
          kernel(l, "gemm_kernel", out_elems * kk).read(filter).read(cur_ofm).write(ofm).done();
          cur_ofm = ofm;
          break;
        }
        case LayerType::Fc: {
          const int ofm = add_region(RegionKind::Ofm, l.index, ofm_bytes);
          const int filter = add_region(RegionKind::Filter, l.index, l.filter->elems() * eb);
          kernel(l, "fill_kernel", out_elems).write(ofm).done();
          kernel(l, "gemm_tn_kernel", out_elems).read(filter).read(cur_ofm).write(ofm).done();
          kernel(l, "axpy_kernel", out_elems).read(ofm).write(ofm).done();
          cur_ofm = ofm;
          break;
        }
        case LayerType::Bn:
          kernel(l, "normalize_kernel", out_elems).read(cur_ofm).write(cur_ofm).done();
          kernel(l, "scale_bias_kernel", out_elems).read(cur_ofm).write(cur_ofm).done();
          kernel(l, "add_bias_kernel", out_elems).read(cur_ofm).write(cur_ofm).done();
          break;
        case LayerType::Act:
          kernel(l, "activate_kernel", out_elems).read(cur_ofm).write(cur_ofm).done();
          break;
        case LayerType::PoolMax:
        case LayerType::PoolAvg: {
          const int ofm = add_region(RegionKind::Ofm, l.index, ofm_bytes);
          const char* name = l.type == LayerType::PoolMax ? "maxpool_kernel" : "avgpool_kernel";
          kernel(l, name, out_elems).read(cur_ofm).write(ofm).done();
          cur_ofm = ofm;
          break;
        }
        case LayerType::Shortcut: {
          const int ofm = add_region(RegionKind::Ofm, l.index, ofm_bytes);
          const int src = ofm_of_layer_.at(static_cast<std::size_t>(*l.shortcut_from));
          kernel(l, "copy_kernel", out_elems).read(src).write(ofm).done();
          kernel(l, "shortcut_kernel", out_elems).read(ofm).write(ofm).done();
          kernel(l, "activate_kernel", out_elems).read(ofm).write(ofm).done();
          cur_ofm = ofm;
          break;
        }
      }
      ofm_of_layer_.push_back(cur_ofm);
    }
    return std::move(seq_);
  }

 private:
  class KernelBuilder {
   public:
    KernelBuilder(Lowerer& lw, const LayerSpec& l, const char* name, double flops) : lw_(lw) {
      ev_.position = static_cast<int>(lw.seq_.kernels.size());
      ev_.kernel_name = name;
      ev_.layer_index = l.index;
      ev_.truth_label = lw.first_of_layer_ ? to_token(l.type) : Token::Cont;
      ev_.flop_scale = flops;
      lw.first_of_layer_ = false;
    }
    KernelBuilder& read(int region) {
      ev_.reads.push_back({region, lw_.touch(region)});
      return *this;
    }
    KernelBuilder& write(int region) {
      ev_.writes.push_back({region, lw_.touch(region)});
      return *this;
    }
    void done() { lw_.seq_.kernels.push_back(std::move(ev_)); }

   private:
    Lowerer& lw_;
    KernelEvent ev_;
  };

  KernelBuilder kernel(const LayerSpec& l, const char* name, double flops) {
    return KernelBuilder(*this, l, name, flops);
  }

  int add_region(RegionKind kind, int owner, std::int64_t bytes) {
    const int id = static_cast<int>(seq_.regions.size());
    seq_.regions.push_back({id, kind, owner, bytes});
    touched_.push_back(false);
    return id;
  }

  bool touch(int region) {
    auto idx = static_cast<std::size_t>(region);
    const bool first = !touched_[idx];
    touched_[idx] = true;
    return first;
  }

  KernelSequence seq_;
  std::vector<bool> touched_;
  std::vector<int> ofm_of_layer_;
  bool first_of_layer_ = true;
  friend class KernelBuilder;
};

}  // namespace detail

inline KernelSequence lower_to_kernels(const ModelSpec& spec) {
  ValidationReport rep = validate_model(spec);
  if (!rep.ok()) throw ValidationError("cannot lower invalid model:\n" + rep.to_string());
  return detail::Lowerer(spec).run();
}

}  // namespace umx
