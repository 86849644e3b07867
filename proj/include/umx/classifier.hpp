#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "umx/error.hpp"
#include "umx/features.hpp"
#include "umx/lowering.hpp"
#include "umx/rng.hpp"
#include "umx/sim.hpp"
#include "umx/util.hpp"

namespace umx {

struct TrainHyper {
  int epochs = 30;
  double lr = 0.15;
  int hidden = 64;
  std::uint64_t seed = 1;
  double momentum = 0.9;
  int batch_size = 8;
  double clip_norm = 5.0;
  double holdout_fraction = 0.1;
};

inline json to_json(const TrainHyper& h) {
  return json{{"epochs", h.epochs},       {"lr", h.lr},
              {"hidden", h.hidden},       {"seed", h.seed},
              {"momentum", h.momentum},   {"batch_size", h.batch_size},
              {"clip_norm", h.clip_norm}, {"holdout_fraction", h.holdout_fraction}};
}

inline TrainHyper train_hyper_from_json(const json& j) {
  detail::check_keys(j,
                     {"epochs", "lr", "hidden", "seed", "momentum", "batch_size", "clip_norm",
                      "holdout_fraction"},
                     {}, "train hyper");
  TrainHyper h;
  if (j.contains("epochs")) h.epochs = j.at("epochs").get<int>();
  if (j.contains("lr")) h.lr = j.at("lr").get<double>();
  if (j.contains("hidden")) h.hidden = j.at("hidden").get<int>();
  if (j.contains("seed")) h.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("momentum")) h.momentum = j.at("momentum").get<double>();
  if (j.contains("batch_size")) h.batch_size = j.at("batch_size").get<int>();
  if (j.contains("clip_norm")) h.clip_norm = j.at("clip_norm").get<double>();
  if (j.contains("holdout_fraction")) h.holdout_fraction = j.at("holdout_fraction").get<double>();
  return h;
}

namespace detail {

// One bidirectional LSTM layer plus a softmax projection. Gate rows are
// stacked [input; forget; candidate; output].
struct LstmParams {
  Eigen::MatrixXd wx_f, wh_f;  // 4H x F, 4H x H
  Eigen::VectorXd b_f;         // 4H
  Eigen::MatrixXd wx_b, wh_b;
  Eigen::VectorXd b_b;
  Eigen::MatrixXd wo;  // C x 2H
  Eigen::VectorXd bo;  // C

  static LstmParams zeros(int input, int hidden) {
    LstmParams p;
    p.wx_f.setZero(4 * hidden, input);
    p.wh_f.setZero(4 * hidden, hidden);
    p.b_f.setZero(4 * hidden);
    p.wx_b.setZero(4 * hidden, input);
    p.wh_b.setZero(4 * hidden, hidden);
    p.b_b.setZero(4 * hidden);
    p.wo.setZero(kAlphabetSize, 2 * hidden);
    p.bo.setZero(kAlphabetSize);
    return p;
  }

  template <typename Fn>
  void for_each(Fn fn) {
    fn(wx_f); fn(wh_f); fn(b_f); fn(wx_b); fn(wh_b); fn(b_b); fn(wo); fn(bo);
  }
  template <typename Fn>
  void for_each(Fn fn) const {
    fn(wx_f); fn(wh_f); fn(b_f); fn(wx_b); fn(wh_b); fn(b_b); fn(wo); fn(bo);
  }

  void set_zero() {
    for_each([](auto& m) { m.setZero(); });
  }

  double squared_norm() const {
    double s = 0.0;
    for_each([&](const auto& m) { s += m.squaredNorm(); });
    return s;
  }

  void add_scaled(const LstmParams& other, double a) {
    wx_f += a * other.wx_f; wh_f += a * other.wh_f; b_f += a * other.b_f;
    wx_b += a * other.wx_b; wh_b += a * other.wh_b; b_b += a * other.b_b;
    wo += a * other.wo; bo += a * other.bo;
  }

  void scale(double a) {
    for_each([&](auto& m) { m *= a; });
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    for_each([&](const auto& m) { out.insert(out.end(), m.data(), m.data() + m.size()); });
    return out;
  }

  void unflatten(const std::vector<double>& flat) {
    std::size_t pos = 0;
    for_each([&](auto& m) {
      if (pos + static_cast<std::size_t>(m.size()) > flat.size())
        throw ShapeMismatch("checkpoint weight count mismatch");
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                flat.begin() + static_cast<std::ptrdiff_t>(pos) + m.size(), m.data());
      pos += static_cast<std::size_t>(m.size());
    });
    if (pos != flat.size()) throw ShapeMismatch("checkpoint weight count mismatch");
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct DirCache {
  Eigen::MatrixXd gi, gf, gg, go, c, tc, h;  // each H x T
  void resize(int hidden, Eigen::Index t) {
    gi.resize(hidden, t); gf.resize(hidden, t); gg.resize(hidden, t);
    go.resize(hidden, t); c.resize(hidden, t); tc.resize(hidden, t); h.resize(hidden, t);
  }
};

// dir = +1 walks t = 0..T-1, dir = -1 walks t = T-1..0
inline void run_direction(const Eigen::MatrixXd& fm, const Eigen::MatrixXd& wx,
                          const Eigen::MatrixXd& wh, const Eigen::VectorXd& b, int dir,
                          DirCache& cache) {
  const Eigen::Index T = fm.rows();
  const int H = static_cast<int>(wh.cols());
  cache.resize(H, T);
  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(H);
  const Eigen::Index start = dir > 0 ? 0 : T - 1;
  for (Eigen::Index s = 0; s < T; ++s) {
    const Eigen::Index t = start + dir * s;
    Eigen::VectorXd z = wx * fm.row(t).transpose() + wh * h_prev + b;
    for (int k = 0; k < H; ++k) {
      cache.gi(k, t) = sigmoid(z(k));
      cache.gf(k, t) = sigmoid(z(H + k));
      cache.gg(k, t) = std::tanh(z(2 * H + k));
      cache.go(k, t) = sigmoid(z(3 * H + k));
    }
    cache.c.col(t) = cache.gf.col(t).cwiseProduct(c_prev) +
                     cache.gi.col(t).cwiseProduct(cache.gg.col(t));
    cache.tc.col(t) = cache.c.col(t).array().tanh();
    cache.h.col(t) = cache.go.col(t).cwiseProduct(cache.tc.col(t));
    h_prev = cache.h.col(t);
    c_prev = cache.c.col(t);
  }
}

inline void backward_direction(const Eigen::MatrixXd& fm, const Eigen::MatrixXd& wh,
                               const DirCache& cache, const Eigen::MatrixXd& dh_out, int dir,
                               Eigen::MatrixXd& dwx, Eigen::MatrixXd& dwh, Eigen::VectorXd& db) {
  const Eigen::Index T = fm.rows();
  const int H = static_cast<int>(wh.cols());
  Eigen::VectorXd dh_rec = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dc_rec = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dz(4 * H);
  const Eigen::Index start = dir > 0 ? 0 : T - 1;
  for (Eigen::Index s = T - 1; s >= 0; --s) {
    const Eigen::Index t = start + dir * s;
    const bool first = s == 0;
    const Eigen::Index t_prev = t - dir;

    const auto gi = cache.gi.col(t);
    const auto gf = cache.gf.col(t);
    const auto gg = cache.gg.col(t);
    const auto go = cache.go.col(t);
    const auto tc = cache.tc.col(t);

    Eigen::VectorXd dh = dh_out.col(t) + dh_rec;
    Eigen::VectorXd dc =
        dc_rec + dh.cwiseProduct(go).cwiseProduct((1.0 - tc.array().square()).matrix());
    Eigen::VectorXd c_prev =
        first ? Eigen::VectorXd::Zero(H) : Eigen::VectorXd(cache.c.col(t_prev));
    Eigen::VectorXd h_prev =
        first ? Eigen::VectorXd::Zero(H) : Eigen::VectorXd(cache.h.col(t_prev));

    dz.segment(0, H) = dc.cwiseProduct(gg).cwiseProduct(gi).cwiseProduct(
        (1.0 - gi.array()).matrix());
    dz.segment(H, H) = dc.cwiseProduct(c_prev).cwiseProduct(gf).cwiseProduct(
        (1.0 - gf.array()).matrix());
    dz.segment(2 * H, H) =
        dc.cwiseProduct(gi).cwiseProduct((1.0 - gg.array().square()).matrix());
    dz.segment(3 * H, H) = dh.cwiseProduct(tc).cwiseProduct(go).cwiseProduct(
        (1.0 - go.array()).matrix());

    dwx += dz * fm.row(t);
    dwh += dz * h_prev.transpose();
    db += dz;
    dh_rec = wh.transpose() * dz;
    dc_rec = dc.cwiseProduct(gf);
  }
}

}  // namespace detail

constexpr int kCheckpointVersion = 1;

class SequenceClassifier {
 public:
  SequenceClassifier() = default;

  // fresh classifier with seeded Xavier-uniform weights; forget-gate bias
  // starts at 1 so early gradients flow
  SequenceClassifier(const HintSet& hs, const NormStats& stats, const TrainHyper& hyper)
      : hs_(hs), stats_(stats), hyper_(hyper), hidden_(hyper.hidden),
        input_dim_(static_cast<int>(hs.hints.size())) {
    params_ = detail::LstmParams::zeros(input_dim_, hidden_);
    rng::Rand rnd(rng::derive_seed(hyper.seed, "classifier-init"));
    auto xavier = [&](Eigen::MatrixXd& m) {
      const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = (2.0 * rnd.uniform01() - 1.0) * a;
    };
    xavier(params_.wx_f);
    xavier(params_.wh_f);
    xavier(params_.wx_b);
    xavier(params_.wh_b);
    xavier(params_.wo);
    params_.b_f.segment(hidden_, hidden_).setOnes();
    params_.b_b.segment(hidden_, hidden_).setOnes();
  }

  const HintSet& hints() const { return hs_; }
  const NormStats& stats() const { return stats_; }
  const TrainHyper& hyper() const { return hyper_; }
  int input_dim() const { return input_dim_; }
  int hidden() const { return hidden_; }

  // posteriors: one softmax row per kernel
  Eigen::MatrixXd forward(const Eigen::MatrixXd& fm) const {
    if (fm.cols() != input_dim_)
      throw ShapeMismatch("feature width " + std::to_string(fm.cols()) +
                          " != checkpoint input dim " + std::to_string(input_dim_));
    detail::DirCache fwd, bwd;
    return forward_cached(fm, fwd, bwd);
  }

  // mean frame cross-entropy and its gradient (accumulated into grad)
  double loss_and_grad(const Eigen::MatrixXd& fm, const std::vector<int>& labels,
                       detail::LstmParams& grad) const {
    const Eigen::Index T = fm.rows();
    if (static_cast<std::size_t>(T) != labels.size())
      throw ShapeMismatch("label count != kernel count");
    detail::DirCache fwd, bwd;
    Eigen::MatrixXd post = forward_cached(fm, fwd, bwd);

    double loss = 0.0;
    Eigen::MatrixXd dlogit(kAlphabetSize, T);  // p - y, scaled by 1/T
    const double inv_t = 1.0 / static_cast<double>(T);
    for (Eigen::Index t = 0; t < T; ++t) {
      const int y = labels[static_cast<std::size_t>(t)];
      loss -= std::log(std::max(post(t, y), 1e-300));
      dlogit.col(t) = post.row(t).transpose() * inv_t;
      dlogit(y, t) -= inv_t;
    }
    loss *= inv_t;

    Eigen::MatrixXd concat(2 * hidden_, T);
    concat.topRows(hidden_) = fwd.h;
    concat.bottomRows(hidden_) = bwd.h;
    grad.wo += dlogit * concat.transpose();
    grad.bo += dlogit.rowwise().sum();

    Eigen::MatrixXd dconcat = params_.wo.transpose() * dlogit;
    detail::backward_direction(fm, params_.wh_f, fwd, dconcat.topRows(hidden_), +1,
                               grad.wx_f, grad.wh_f, grad.b_f);
    detail::backward_direction(fm, params_.wh_b, bwd, dconcat.bottomRows(hidden_), -1,
                               grad.wx_b, grad.wh_b, grad.b_b);
    return loss;
  }

  detail::LstmParams& params() { return params_; }
  const detail::LstmParams& params() const { return params_; }

  json to_checkpoint() const {
    return json{{"format_version", kCheckpointVersion},
                {"hint_set", hs_.id},
                {"input_dim", input_dim_},
                {"hidden", hidden_},
                {"hyper", to_json(hyper_)},
                {"norm_stats", to_json(stats_)},
                {"weights", params_.flatten()}};
  }

  static SequenceClassifier from_checkpoint(const json& j) {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kCheckpointVersion)
      throw Error("checkpoint format version mismatch");
    SequenceClassifier clf;
    clf.hs_ = hint_set(j.at("hint_set").get<std::string>());
    clf.stats_ = norm_stats_from_json(j.at("norm_stats"));
    clf.hyper_ = train_hyper_from_json(j.at("hyper"));
    clf.input_dim_ = j.at("input_dim").get<int>();
    clf.hidden_ = j.at("hidden").get<int>();
    if (clf.input_dim_ != static_cast<int>(clf.hs_.hints.size()))
      throw ShapeMismatch("checkpoint input dim != hint set size");
    clf.params_ = detail::LstmParams::zeros(clf.input_dim_, clf.hidden_);
    clf.params_.unflatten(j.at("weights").get<std::vector<double>>());
    return clf;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for write: " + path);
    out << to_checkpoint().dump() << "\n";
  }

  static SequenceClassifier load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint: " + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ParseError(path + ": " + e.what());
    }
    return from_checkpoint(j);
  }

 private:
  Eigen::MatrixXd forward_cached(const Eigen::MatrixXd& fm, detail::DirCache& fwd,
                                 detail::DirCache& bwd) const {
    const Eigen::Index T = fm.rows();
    detail::run_direction(fm, params_.wx_f, params_.wh_f, params_.b_f, +1, fwd);
    detail::run_direction(fm, params_.wx_b, params_.wh_b, params_.b_b, -1, bwd);
    Eigen::MatrixXd post(T, kAlphabetSize);
    Eigen::VectorXd logit(kAlphabetSize);
    for (Eigen::Index t = 0; t < T; ++t) {
      logit = params_.wo.leftCols(hidden_) * fwd.h.col(t) +
              params_.wo.rightCols(hidden_) * bwd.h.col(t) + params_.bo;
      const double m = logit.maxCoeff();
      Eigen::ArrayXd e = (logit.array() - m).exp();
      post.row(t) = (e / e.sum()).matrix().transpose();
    }
    return post;
  }

  HintSet hs_;
  NormStats stats_;
  TrainHyper hyper_;
  int hidden_ = 0;
  int input_dim_ = 0;
  detail::LstmParams params_;
};

inline std::vector<int> labels_from_trace(const Trace& tr) {
  std::vector<int> out;
  out.reserve(tr.records.size());
  for (const auto& r : tr.records) out.push_back(static_cast<int>(r.truth_label));
  return out;
}

struct TrainReport {
  double final_loss = 0.0;
  double token_accuracy = 0.0;  // held-out when available, else training set
  int holdout_traces = 0;
  std::vector<double> epoch_losses;
};

struct TrainResult {
  SequenceClassifier classifier;
  TrainReport report;
};

// Frame-wise cross-entropy training with momentum SGD and global-norm
// gradient clipping. Kernel-level alignment is known from lowering, so this
// realizes the sequence objective without a full forward-backward pass over
// alignments. Deterministic for fixed (corpus, hyper): per-trace gradients
// are reduced in index order regardless of the worker count.
inline TrainResult train_classifier(const std::vector<Trace>& corpus, const HintSet& hs,
                                    const TrainHyper& hyper) {
  if (corpus.empty()) throw Error("training corpus is empty");
  NormStats stats = compute_norm_stats(corpus, hs);

  std::vector<Eigen::MatrixXd> features;
  std::vector<std::vector<int>> labels;
  features.reserve(corpus.size());
  for (const auto& tr : corpus) {
    if (tr.records.empty()) throw EmptyTrace();
    features.push_back(featurize(tr, hs, stats));
    labels.push_back(labels_from_trace(tr));
  }

  rng::Rand rnd(rng::derive_seed(hyper.seed, "classifier-train"));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[static_cast<std::size_t>(rnd.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  };
  shuffle(order);

  const auto holdout_count = static_cast<std::size_t>(
      hyper.holdout_fraction * static_cast<double>(corpus.size()));
  std::vector<std::size_t> hold(order.end() - static_cast<std::ptrdiff_t>(holdout_count),
                                order.end());
  std::vector<std::size_t> train(order.begin(),
                                 order.end() - static_cast<std::ptrdiff_t>(holdout_count));

  SequenceClassifier clf(hs, stats, hyper);
  detail::LstmParams velocity =
      detail::LstmParams::zeros(clf.input_dim(), clf.hidden());

  const int threads = thread_count();
  const std::size_t batch = std::max(1, hyper.batch_size);
  TrainReport report;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle(train);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < train.size(); begin += batch) {
      const std::size_t count = std::min(batch, train.size() - begin);
      std::vector<detail::LstmParams> slot(
          count, detail::LstmParams::zeros(clf.input_dim(), clf.hidden()));
      std::vector<double> slot_loss(count, 0.0);
      parallel_for(count, [&](std::size_t k) {
        const std::size_t idx = train[begin + k];
        slot_loss[k] = clf.loss_and_grad(features[idx], labels[idx], slot[k]);
      }, threads);

      detail::LstmParams grad = std::move(slot[0]);
      for (std::size_t k = 1; k < count; ++k) grad.add_scaled(slot[k], 1.0);
      grad.scale(1.0 / static_cast<double>(count));
      for (double l : slot_loss) epoch_loss += l;

      const double norm = std::sqrt(grad.squared_norm());
      if (!std::isfinite(norm))
        throw Divergence("gradient became non-finite at epoch " + std::to_string(epoch));
      if (norm > hyper.clip_norm && norm > 0.0) grad.scale(hyper.clip_norm / norm);

      velocity.scale(hyper.momentum);
      velocity.add_scaled(grad, -hyper.lr);
      clf.params().add_scaled(velocity, 1.0);
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(train.size(), 1));
    if (!std::isfinite(epoch_loss))
      throw Divergence("loss became non-finite at epoch " + std::to_string(epoch));
    report.epoch_losses.push_back(epoch_loss);
  }

  // final training loss and held-out token accuracy
  auto eval = [&](const std::vector<std::size_t>& idxs, double* loss_out) {
    double loss = 0.0;
    std::size_t frames = 0, correct = 0;
    for (std::size_t idx : idxs) {
      const Eigen::MatrixXd post = clf.forward(features[idx]);
      for (Eigen::Index t = 0; t < post.rows(); ++t) {
        const int y = labels[idx][static_cast<std::size_t>(t)];
        loss -= std::log(std::max(post(t, y), 1e-300));
        Eigen::Index arg;
        post.row(t).maxCoeff(&arg);
        correct += arg == y;
        ++frames;
      }
    }
    if (loss_out && frames) *loss_out = loss / static_cast<double>(frames);
    return frames ? static_cast<double>(correct) / static_cast<double>(frames) : 0.0;
  };

  report.holdout_traces = static_cast<int>(hold.size());
  eval(train, &report.final_loss);
  report.token_accuracy = eval(hold.empty() ? train : hold, nullptr);

  return {std::move(clf), std::move(report)};
}

}  // namespace umx
