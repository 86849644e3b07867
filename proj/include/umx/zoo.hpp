#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "umx/error.hpp"
#include "umx/model.hpp"
#include "umx/rng.hpp"

namespace umx {

namespace detail {

// Builds a ModelSpec layer by layer, tracking feature-map dims so catalog
// definitions read like network config files.
class ModelBuilder {
 public:
  ModelBuilder(std::string name, Dims input) : cur_(input) { m_.name = std::move(name); }

  ModelBuilder& conv(std::int64_t out_ch, int k, int stride = 1, int pad = -1) {
    if (pad < 0) pad = k / 2;
    LayerSpec l;
    l.type = LayerType::Conv;
    l.ifm = cur_;
    l.filter = FilterDims{cur_.c, k, k, out_ch};
    l.stride = stride;
    l.pad = pad;
    l.ofm = Dims{out_ch, (cur_.h + 2 * pad - k) / stride + 1,
                 (cur_.w + 2 * pad - k) / stride + 1};
    push(l);
    return *this;
  }

  ModelBuilder& bn() { return in_place(LayerType::Bn); }
  ModelBuilder& act() { return in_place(LayerType::Act); }

  ModelBuilder& maxpool(int k = 2, int stride = 2, int pad = 0) {
    return pool(LayerType::PoolMax, k, stride, pad);
  }

  ModelBuilder& avgpool_global() {
    LayerSpec l;
    l.type = LayerType::PoolAvg;
    l.ifm = cur_;
    l.ofm = Dims{cur_.c, 1, 1};
    l.stride = 1;
    push(l);
    return *this;
  }

  ModelBuilder& fc(std::int64_t out) {
    LayerSpec l;
    l.type = LayerType::Fc;
    l.ifm = cur_;
    l.filter = FilterDims{cur_.elems(), 1, 1, out};
    l.ofm = Dims{out, 1, 1};
    push(l);
    return *this;
  }

  // residual add whose source is `back` layers before the one about to be
  // added (darknet-style relative indexing)
  ModelBuilder& shortcut(int back) {
    return shortcut_abs(static_cast<int>(m_.layers.size()) - back);
  }

  ModelBuilder& shortcut_abs(int src_index) {
    LayerSpec l;
    l.type = LayerType::Shortcut;
    l.ifm = cur_;
    l.ofm = cur_;
    l.shortcut_from = src_index;
    push(l);
    return *this;
  }

  int last_index() const { return static_cast<int>(m_.layers.size()) - 1; }
  const Dims& dims() const { return cur_; }
  const std::vector<LayerSpec>& layers() const { return m_.layers; }

  ModelSpec build() && { return std::move(m_); }

 private:
  ModelBuilder& in_place(LayerType t) {
    LayerSpec l;
    l.type = t;
    l.ifm = cur_;
    l.ofm = cur_;
    push(l);
    return *this;
  }

  ModelBuilder& pool(LayerType t, int k, int stride, int pad) {
    LayerSpec l;
    l.type = t;
    l.ifm = cur_;
    l.stride = stride;
    l.pad = pad;
    l.ofm = Dims{cur_.c, (cur_.h + 2 * pad - k) / stride + 1,
                 (cur_.w + 2 * pad - k) / stride + 1};
    push(l);
    return *this;
  }

  void push(LayerSpec l) {
    l.index = static_cast<int>(m_.layers.size());
    cur_ = l.ofm;
    m_.layers.push_back(std::move(l));
  }

  ModelSpec m_;
  Dims cur_;
};

inline ModelSpec build_alexnet() {
  ModelBuilder b("alexnet", Dims{3, 227, 227});
  b.conv(96, 11, 4, 0).act().maxpool(3, 2);
  b.conv(256, 5, 1, 2).act().maxpool(3, 2);
  b.conv(384, 3).act();
  b.conv(384, 3).act();
  b.conv(256, 3).act().maxpool(3, 2);
  b.fc(4096).act();
  b.fc(4096).act();
  b.fc(1000);
  return std::move(b).build();
}

inline ModelSpec build_vgg16() {
  ModelBuilder b("vgg16", Dims{3, 224, 224});
  auto block = [&](std::int64_t ch, int convs) {
    for (int i = 0; i < convs; ++i) b.conv(ch, 3).act();
    b.maxpool(2, 2);
  };
  block(64, 2);
  block(128, 2);
  block(256, 3);
  block(512, 3);
  block(512, 3);
  b.fc(4096).act();
  b.fc(4096).act();
  b.fc(1000);
  return std::move(b).build();
}

inline ModelSpec build_reference() {
  ModelBuilder b("reference", Dims{3, 256, 256});
  for (std::int64_t ch : {16, 32, 64, 128, 256, 512})
    b.conv(ch, 3).bn().act().maxpool(2, 2);
  b.conv(1024, 3).bn().act();
  b.conv(1000, 1, 1, 0);
  b.avgpool_global();
  return std::move(b).build();
}

inline ModelSpec build_tiny_darknet() {
  ModelBuilder b("tiny-darknet", Dims{3, 224, 224});
  auto cba = [&](std::int64_t ch, int k) { b.conv(ch, k).bn().act(); };
  cba(16, 3);
  b.maxpool(2, 2);
  cba(32, 3);
  b.maxpool(2, 2);
  cba(16, 1);
  cba(128, 3);
  cba(16, 1);
  cba(128, 3);
  b.maxpool(2, 2);
  cba(32, 1);
  cba(256, 3);
  cba(32, 1);
  cba(256, 3);
  b.maxpool(2, 2);
  cba(64, 1);
  cba(512, 3);
  cba(64, 1);
  cba(512, 3);
  cba(128, 1);
  b.conv(1000, 1, 1, 0);
  b.avgpool_global();
  return std::move(b).build();
}

inline ModelSpec build_extraction() {
  ModelBuilder b("extraction", Dims{3, 224, 224});
  auto cba = [&](std::int64_t ch, int k, int stride = 1) { b.conv(ch, k, stride).bn().act(); };
  cba(64, 7, 2);
  b.maxpool(2, 2);
  cba(192, 3);
  b.maxpool(2, 2);
  cba(128, 1);
  cba(256, 3);
  cba(256, 1);
  cba(512, 3);
  b.maxpool(2, 2);
  for (int i = 0; i < 4; ++i) {
    cba(256, 1);
    cba(512, 3);
  }
  cba(512, 1);
  cba(1024, 3);
  b.maxpool(2, 2);
  for (int i = 0; i < 2; ++i) {
    cba(512, 1);
    cba(1024, 3);
  }
  b.conv(1000, 1, 1, 0);
  b.avgpool_global();
  return std::move(b).build();
}

// Residual catalogs keep every residual block dimension-preserving; stage
// downsampling happens in a standalone transition conv so that each SHORTCUT
// source has matching ofm dims.
inline ModelSpec build_resnet18() {
  ModelBuilder b("resnet18", Dims{3, 256, 256});
  b.conv(64, 7, 2, 3).bn().act().maxpool(2, 2);
  auto basic_block = [&](std::int64_t ch) {
    // entry = layer producing the block input
    b.conv(ch, 3).bn().act();
    b.conv(ch, 3).bn();
    b.shortcut(6);
  };
  auto stage = [&](std::int64_t ch, int blocks, bool downsample) {
    if (downsample) b.conv(ch, 3, 2, 1).bn().act();
    for (int i = 0; i < blocks; ++i) basic_block(ch);
  };
  stage(64, 2, false);
  stage(128, 2, true);
  stage(256, 2, true);
  stage(512, 2, true);
  b.avgpool_global();
  b.fc(1000);
  return std::move(b).build();
}

inline ModelSpec build_resnet_bottleneck(const std::string& name, int s3_blocks) {
  ModelBuilder b(name, Dims{3, 256, 256});
  b.conv(64, 7, 2, 3).bn().act().maxpool(2, 2);
  auto bottleneck = [&](std::int64_t mid, std::int64_t out) {
    b.conv(mid, 1, 1, 0).bn().act();
    b.conv(mid, 3).bn().act();
    b.conv(out, 1, 1, 0).bn();
    b.shortcut(9);
  };
  auto stage = [&](std::int64_t mid, std::int64_t out, int blocks, int stride) {
    b.conv(out, 1, stride, 0).bn().act();
    for (int i = 0; i < blocks; ++i) bottleneck(mid, out);
  };
  stage(64, 256, 3, 1);
  stage(128, 512, 4, 2);
  stage(256, 1024, s3_blocks, 2);
  stage(512, 2048, 3, 2);
  b.avgpool_global();
  b.fc(1000);
  return std::move(b).build();
}

}  // namespace detail

inline const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = {
      "alexnet", "vgg16",    "reference", "tiny-darknet",
      "extraction", "resnet18", "resnet50",  "resnet101"};
  return names;
}

inline bool is_sequential_benchmark(const std::string& name) {
  return name == "alexnet" || name == "vgg16" || name == "reference" ||
         name == "tiny-darknet" || name == "extraction";
}

inline ModelSpec build_benchmark(const std::string& name) {
  ModelSpec m;
  if (name == "alexnet") m = detail::build_alexnet();
  else if (name == "vgg16") m = detail::build_vgg16();
  else if (name == "reference") m = detail::build_reference();
  else if (name == "tiny-darknet") m = detail::build_tiny_darknet();
  else if (name == "extraction") m = detail::build_extraction();
  else if (name == "resnet18") m = detail::build_resnet18();
  else if (name == "resnet50") m = detail::build_resnet_bottleneck("resnet50", 6);
  else if (name == "resnet101") m = detail::build_resnet_bottleneck("resnet101", 23);
  else throw UnknownBenchmark(name);

  ValidationReport rep = validate_model(m);
  if (!rep.ok()) throw ValidationError("catalog model " + name + " invalid:\n" + rep.to_string());
  return m;
}

struct DimRange {
  std::int64_t lo = 1;
  std::int64_t hi = 1;
};

// Random-model grammar mirrors the benchmark family: conv blocks optionally
// followed by BN/ACT, pooling between blocks, dimension-compatible shortcuts,
// optional global-average-pool tail with FC stack.
struct RandomModelCfg {
  int min_layers = 8;
  int max_layers = 40;
  double shortcut_probability = 0.20;
  DimRange input_hw{32, 128};
  DimRange input_ch{3, 3};
  DimRange channels{8, 512};
  DimRange fc_units{64, 2048};
  double bn_probability = 0.6;
  double act_probability = 0.8;
  double pool_probability = 0.35;
  double tail_probability = 0.5;
};

namespace detail {

inline void check_range(const DimRange& r, const char* name) {
  if (r.lo < 1 || r.hi < r.lo)
    throw InvalidConfig(std::string("dim range '") + name + "' empty or inverted");
}

}  // namespace detail

inline ModelSpec generate_random_model(const RandomModelCfg& cfg, std::uint64_t seed) {
  if (cfg.min_layers < 3) throw InvalidConfig("min_layers must be >= 3");
  if (cfg.max_layers < cfg.min_layers) throw InvalidConfig("max_layers < min_layers");
  detail::check_range(cfg.input_hw, "input_hw");
  detail::check_range(cfg.input_ch, "input_ch");
  detail::check_range(cfg.channels, "channels");
  detail::check_range(cfg.fc_units, "fc_units");

  rng::Rand rnd(rng::derive_seed(seed, "random-model"));
  const int target = static_cast<int>(rnd.uniform_int(cfg.min_layers, cfg.max_layers));

  const std::int64_t side = rnd.uniform_int(cfg.input_hw.lo, cfg.input_hw.hi) / 2 * 2;
  const Dims input{rnd.uniform_int(cfg.input_ch.lo, cfg.input_ch.hi),
                   std::max<std::int64_t>(side, 2), std::max<std::int64_t>(side, 2)};
  detail::ModelBuilder b("random-" + std::to_string(seed), input);

  auto pick_channels = [&](std::int64_t cur) {
    const double f = rnd.pick(std::vector<double>{0.5, 1.0, 1.0, 2.0, 2.0, 4.0});
    auto ch = static_cast<std::int64_t>(static_cast<double>(cur) * f);
    ch = std::clamp(ch, cfg.channels.lo, cfg.channels.hi);
    return std::max<std::int64_t>(8, ch / 8 * 8);
  };

  int remaining = target;
  bool in_fc_tail = false;

  // stem conv is mandatory: guarantees the CONV/FC invariant
  b.conv(pick_channels(16), static_cast<int>(rnd.pick(std::vector<std::int64_t>{3, 3, 5, 7})));
  --remaining;

  while (remaining > 0) {
    const Dims cur = b.dims();
    const bool can_pool = cur.h >= 2 && cur.w >= 2;

    if (in_fc_tail) {
      if (remaining >= 2 && rnd.bernoulli(0.5)) {
        b.fc(rnd.uniform_int(cfg.fc_units.lo, cfg.fc_units.hi) / 8 * 8).act();
        remaining -= 2;
      } else {
        b.fc(rnd.uniform_int(10, 1000));
        --remaining;
      }
      continue;
    }

    // enter the classifier tail when almost out of budget
    if (remaining <= 3 && rnd.bernoulli(cfg.tail_probability)) {
      if (cur.h > 1 && (cur.elems() > 65536 || rnd.bernoulli(0.7))) {
        b.avgpool_global();
        --remaining;
      }
      in_fc_tail = true;
      continue;
    }

    // dimension-compatible residual add (never sourcing the previous layer)
    if (rnd.bernoulli(cfg.shortcut_probability)) {
      std::vector<int> cands;
      for (int i = 0; i + 1 < static_cast<int>(b.layers().size()); ++i)
        if (b.layers()[i].ofm == cur && b.layers()[i].type != LayerType::Shortcut)
          cands.push_back(i);
      if (!cands.empty()) {
        b.shortcut_abs(cands[static_cast<std::size_t>(
            rnd.uniform_int(0, static_cast<std::int64_t>(cands.size()) - 1))]);
        --remaining;
        continue;
      }
    }

    if (can_pool && rnd.bernoulli(cfg.pool_probability)) {
      b.maxpool(2, 2);
      --remaining;
      continue;
    }

    // conv block: CONV [BN] [ACT], trimmed to the remaining budget
    int block = 1;
    const bool with_bn = rnd.bernoulli(cfg.bn_probability);
    const bool with_act = rnd.bernoulli(cfg.act_probability);
    if (with_bn) ++block;
    if (with_act) ++block;
    block = std::min(block, remaining);

    const int k = static_cast<int>(rnd.pick(std::vector<std::int64_t>{1, 1, 3, 3, 3, 5}));
    const int stride = (can_pool && rnd.bernoulli(0.12)) ? 2 : 1;
    b.conv(pick_channels(cur.c), k, stride);
    int used = 1;
    if (with_bn && used < block) { b.bn(); ++used; }
    if (with_act && used < block) { b.act(); ++used; }
    remaining -= used;
  }

  return std::move(b).build();
}

}  // namespace umx
