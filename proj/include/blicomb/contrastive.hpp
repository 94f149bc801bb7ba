#pragma once

// Contrastive training of the spring networks.
//
// For dictionary entry i with source x and gold target y, and J mined
// negatives y_1..y_J:
//
//   L = - sum_i ( J cos(u_x, u_y) - sum_j cos(u_x, u_{y_j}) )
//
// Negatives are the J best-scoring targets of the current model with every
// gold target of x excluded. Only spring parameters are updated; mapped
// embeddings and anchors stay fixed.

#include "blicomb/anchors.hpp"
#include "blicomb/retrieve.hpp"
#include "blicomb/spring.hpp"
#include "blicomb/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace blicomb::contrastive {

enum class Optimizer { adam, sgd };

struct TrainConfig {
  int negatives = 10;  ///< J
  int epochs = 20;
  int batch_size = 128;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1234;
  double gamma_init = spring::kDefaultGammaInit;

  int max_rounds = 10;   ///< unsupervised re-induction rounds
  int round_epochs = 5;  ///< training epochs per unsupervised round
  /// Retrieval used to re-induce the dictionary between unsupervised rounds.
  /// lambda > 0 mixes in the mapped anchors passed to train_unsupervised.
  retrieve::SimilarityConfig induction{};

  std::ostream* log = nullptr;

  /// One negative per source word, as used for unsupervised training.
  static TrainConfig unsupervised_defaults() {
    TrainConfig c;
    c.negatives = 1;
    return c;
  }

  void validate() const {
    if (negatives < 1) throw ConfigError("negatives (J) must be >= 1");
    if (epochs < 0 || batch_size < 1 || !(learning_rate >= 0.0)) throw ConfigError("invalid training schedule");
    if (max_rounds < 1 || round_epochs < 1) throw ConfigError("unsupervised rounds/epochs must be >= 1");
    induction.validate();
  }
};

/// Unified representations of both vocabularies.
struct UnifiedSpace {
  Matrix ux;
  Matrix uy;
};

inline UnifiedSpace unified_space(const Matrix& ex, const Matrix& ey, const anchors::AnchorMatrix& ax,
                                  const anchors::AnchorMatrix& ay, const spring::SpringParams& params) {
  return {spring::unify(ex, ax.data, params.x), spring::unify(ey, ay.data, params.y)};
}

namespace detail {

inline double cosine(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const double n = a.norm() * b.norm();
  return n > 0.0 ? a.dot(b) / n : 0.0;
}

/// d cos(a, b) / d a, scaled by `w`, accumulated into `out`.
inline void add_cosine_grad(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b,
                            double w, Eigen::Ref<Eigen::RowVectorXd> out) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return;
  const double c = a.dot(b) / (na * nb);
  out += w * (b / (na * nb) - c * a / (na * na));
}

}  // namespace detail

struct MiningStats {
  std::size_t short_entries = 0;  ///< entries that got fewer than J negatives
};

/// For each dictionary entry, the J targets with highest cosine to u_x,
/// excluding all gold targets of that source; ties go to the lower index.
inline std::vector<std::vector<Index>> mine_negatives(const Matrix& ux, const Matrix& uy,
                                                      const BilingualDictionary& dict, int J,
                                                      MiningStats* stats = nullptr) {
  if (J < 1) throw ConfigError("mine_negatives: J must be >= 1");
  if (ux.cols() != uy.cols()) throw DimensionError("mine_negatives: dimension mismatch");
  dict.check_ranges(ux.rows(), uy.rows());
  const auto gold = dict.targets_by_source();
  const Matrix uyn = unit_rows(uy);

  // One candidate list per distinct source; entries sharing a source share it.
  std::unordered_map<Index, std::vector<Index>> by_source;
  MiningStats st;
  std::vector<Index> order(static_cast<std::size_t>(uy.rows()));
  for (Index src : dict.sources()) {
    Eigen::RowVectorXd q = ux.row(src);
    const double qn = q.norm();
    if (qn > 0.0) q /= qn;
    const Eigen::RowVectorXd s = q * uyn.transpose();
    const auto& excl = gold.at(src);
    order.clear();
    for (Index j = 0; j < uy.rows(); ++j) {
      if (std::find(excl.begin(), excl.end(), j) == excl.end()) order.push_back(j);
    }
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(J), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](Index a, Index b) { return s(a) > s(b) || (s(a) == s(b) && a < b); });
    order.resize(take);
    if (take < static_cast<std::size_t>(J)) ++st.short_entries;
    by_source.emplace(src, order);
  }
  std::vector<std::vector<Index>> out;
  out.reserve(dict.size());
  for (const auto& p : dict) out.push_back(by_source.at(p.src));
  if (stats) *stats = st;
  return out;
}

/// The contrastive loss over the whole dictionary; lower is better.
inline double contrastive_loss(const Matrix& ux, const Matrix& uy, const BilingualDictionary& dict,
                               const std::vector<std::vector<Index>>& negatives, int J) {
  if (negatives.size() != dict.size()) throw DimensionError("contrastive_loss: one negative list per entry required");
  double total = 0.0;
  for (std::size_t i = 0; i < dict.size(); ++i) {
    const auto& p = dict[i];
    if (negatives[i].size() > static_cast<std::size_t>(J)) throw DimensionError("contrastive_loss: more than J negatives");
    double term = J * detail::cosine(ux.row(p.src), uy.row(p.tgt));
    for (Index n : negatives[i]) term -= detail::cosine(ux.row(p.src), uy.row(n));
    total -= term;
  }
  return total;
}

/// Loss and its gradient with respect to every row of ux and uy.
struct LossGradient {
  double loss = 0.0;
  Matrix gx;
  Matrix gy;
};

inline LossGradient contrastive_loss_gradient(const Matrix& ux, const Matrix& uy, const BilingualDictionary& dict,
                                              const std::vector<std::vector<Index>>& negatives, int J) {
  LossGradient g;
  g.loss = contrastive_loss(ux, uy, dict, negatives, J);
  g.gx = Matrix::Zero(ux.rows(), ux.cols());
  g.gy = Matrix::Zero(uy.rows(), uy.cols());
  for (std::size_t i = 0; i < dict.size(); ++i) {
    const auto& p = dict[i];
    detail::add_cosine_grad(ux.row(p.src), uy.row(p.tgt), -static_cast<double>(J), g.gx.row(p.src));
    detail::add_cosine_grad(uy.row(p.tgt), ux.row(p.src), -static_cast<double>(J), g.gy.row(p.tgt));
    for (Index n : negatives[i]) {
      detail::add_cosine_grad(ux.row(p.src), uy.row(n), 1.0, g.gx.row(p.src));
      detail::add_cosine_grad(uy.row(n), ux.row(p.src), 1.0, g.gy.row(n));
    }
  }
  return g;
}

/// Per-field Adam / SGD update over both springs.
class SpringOptimizer {
 public:
  explicit SpringOptimizer(const TrainConfig& cfg) : cfg_(cfg) {}

  void step(spring::SpringParams& params, spring::SpringParams& grads) {
    if (cfg_.optimizer == Optimizer::sgd) {
      auto sgd = [&](auto& p, auto& g) { p -= cfg_.learning_rate * g; };
      params.x.zip(grads.x, sgd);
      params.y.zip(grads.y, sgd);
      return;
    }
    if (!m_) {
      m_ = zeros_like(params);
      v_ = zeros_like(params);
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
    update(params.x, grads.x, m_->x, v_->x, c1, c2);
    update(params.y, grads.y, m_->y, v_->y, c1, c2);
  }

 private:
  static spring::SpringParams zeros_like(const spring::SpringParams& p) {
    return {spring::SpringNet::zeros(p.x.anchor_dim(), p.x.dim()), spring::SpringNet::zeros(p.y.anchor_dim(), p.y.dim())};
  }

  void update(spring::SpringNet& p, spring::SpringNet& g, spring::SpringNet& m, spring::SpringNet& v, double c1,
              double c2) {
    auto apply = [&](auto& param, auto& grad, auto& mom, auto& var) {
      mom = cfg_.adam_beta1 * mom + (1.0 - cfg_.adam_beta1) * grad;
      var = cfg_.adam_beta2 * var + (1.0 - cfg_.adam_beta2) * grad.cwiseProduct(grad);
      param.array() -= cfg_.learning_rate * (mom.array() / c1) / ((var.array() / c2).sqrt() + cfg_.adam_eps);
    };
    apply(p.w0, g.w0, m.w0, v.w0);
    apply(p.b0, g.b0, m.b0, v.b0);
    apply(p.w1, g.w1, m.w1, v.w1);
    apply(p.b1, g.b1, m.b1, v.b1);
    apply(p.gamma, g.gamma, m.gamma, v.gamma);
  }

  TrainConfig cfg_;
  std::optional<spring::SpringParams> m_, v_;
  int t_ = 0;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;    ///< summed batch losses over the epoch
  double val_p1 = -1.0; ///< -1 when no validation dictionary is given
};

struct TrainResult {
  spring::SpringParams params;
  std::vector<EpochStats> curve;
  int best_epoch = 0;  ///< 0 = the initial parameters
  double best_val_p1 = -1.0;
};

/// Runs the epochs and mini-batch updates; shared by both training modes.
class SpringTrainer {
 public:
  SpringTrainer(const Matrix& ex, const Matrix& ey, const anchors::AnchorMatrix& ax, const anchors::AnchorMatrix& ay,
                const TrainConfig& cfg)
      : ex_(ex), ey_(ey), ax_(ax), ay_(ay), cfg_(cfg), opt_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    if (ex.cols() != ey.cols()) throw DimensionError("mapped embedding spaces differ in dimension");
    if (ex.rows() != ax.data.rows() || ey.rows() != ay.data.rows()) {
      throw DimensionError("anchor rows do not align with embedding rows");
    }
  }

  spring::SpringParams initial_params() {
    return spring::SpringParams::initialized(ax_.dim(), ay_.dim(), ex_.cols(), rng_, cfg_.gamma_init);
  }

  UnifiedSpace unified(const spring::SpringParams& p) const { return unified_space(ex_, ey_, ax_, ay_, p); }

  /// Dictionary entries whose both sides have anchors.
  BilingualDictionary trainable(const BilingualDictionary& dict) const {
    BilingualDictionary out;
    for (const auto& p : dict) {
      if (ax_.covered(p.src) && ay_.covered(p.tgt)) out.add(p.src, p.tgt);
    }
    return out;
  }

  /// One pass: re-mine negatives against the current model, then shuffled
  /// mini-batch descent. Returns the summed batch losses.
  double epoch(spring::SpringParams& params, const BilingualDictionary& dict) {
    if (dict.empty()) return 0.0;
    const UnifiedSpace u = unified(params);
    MiningStats ms;
    const auto negatives = mine_negatives(u.ux, u.uy, dict, cfg_.negatives, &ms);
    if (ms.short_entries > 0 && cfg_.log) {
      *cfg_.log << "warning: " << ms.short_entries << " entries got fewer than J negatives\n";
    }

    std::vector<std::size_t> order(dict.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);

    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg_.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg_.batch_size));
      total += batch_step(params, dict, negatives, order, start, end);
    }
    if (!std::isfinite(total)) throw AbortError("contrastive training produced a non-finite loss");
    return total;
  }

 private:
  double batch_step(spring::SpringParams& params, const BilingualDictionary& dict,
                    const std::vector<std::vector<Index>>& negatives, const std::vector<std::size_t>& order,
                    std::size_t start, std::size_t end) {
    // Local row numbering for the words touched by this batch.
    std::vector<Index> xs, ys;
    std::unordered_map<Index, Index> xpos, ypos;
    auto local = [](std::vector<Index>& rows, std::unordered_map<Index, Index>& pos, Index r) {
      auto [it, added] = pos.try_emplace(r, static_cast<Index>(rows.size()));
      if (added) rows.push_back(r);
      return it->second;
    };
    std::vector<TranslationPair> entries;
    std::vector<std::vector<Index>> negs;
    for (std::size_t k = start; k < end; ++k) {
      const std::size_t i = order[k];
      const Index sx = local(xs, xpos, dict[i].src);
      const Index ty = local(ys, ypos, dict[i].tgt);
      entries.push_back({sx, ty});
      std::vector<Index> ln;
      for (Index n : negatives[i]) ln.push_back(local(ys, ypos, n));
      negs.push_back(std::move(ln));
    }

    const Matrix axb = select_rows(ax_.data, xs);
    const Matrix ayb = select_rows(ay_.data, ys);
    const auto cx = spring::spring_forward_cached(axb, params.x);
    const auto cy = spring::spring_forward_cached(ayb, params.y);
    const Matrix ux = spring::unify(select_rows(ex_, xs), cx.offset, params.x.gamma);
    const Matrix uy = spring::unify(select_rows(ey_, ys), cy.offset, params.y.gamma);

    const BilingualDictionary batch(std::move(entries));
    auto lg = contrastive_loss_gradient(ux, uy, batch, negs, cfg_.negatives);
    const double scale = 1.0 / static_cast<double>(batch.size());
    lg.gx *= scale;
    lg.gy *= scale;

    spring::SpringParams grads{spring::spring_backward(axb, lg.gx, params.x, cx),
                               spring::spring_backward(ayb, lg.gy, params.y, cy)};
    opt_.step(params, grads);
    return lg.loss;
  }

  const Matrix& ex_;
  const Matrix& ey_;
  const anchors::AnchorMatrix& ax_;
  const anchors::AnchorMatrix& ay_;
  TrainConfig cfg_;
  SpringOptimizer opt_;
  std::mt19937_64 rng_;
};

/// Validation P@1 of cosine retrieval in the unified space.
inline double unified_cosine_p1(const UnifiedSpace& u, const BilingualDictionary& val) {
  retrieve::SimilarityConfig cos{0.0, 1, retrieve::SimilarityMode::cosine, retrieve::CslsComposition::per_term};
  retrieve::InterpolatedScorer scorer({u.ux, u.uy, {}, {}}, cos);
  return retrieve::evaluate_p1(scorer, val);
}

/// Trains both springs on `train`, keeping the parameters (initial ones
/// included) with the best validation P@1. `ex`, `ey` are the mapped static
/// embeddings, `ax`, `ay` the (unmapped) anchors fed to the springs.
inline TrainResult train_supervised(const Matrix& ex, const Matrix& ey, const anchors::AnchorMatrix& ax,
                                    const anchors::AnchorMatrix& ay, const BilingualDictionary& train,
                                    const BilingualDictionary& val, const TrainConfig& cfg,
                                    std::optional<spring::SpringParams> init = std::nullopt) {
  SpringTrainer trainer(ex, ey, ax, ay, cfg);
  train.check_ranges(ex.rows(), ey.rows());
  val.check_ranges(ex.rows(), ey.rows());
  spring::SpringParams params = init ? std::move(*init) : trainer.initial_params();
  const BilingualDictionary entries = trainer.trainable(train);
  if (entries.empty()) throw ConfigError("train_supervised: no dictionary entry has anchors on both sides");

  TrainResult res;
  res.params = params;
  if (!val.empty()) res.best_val_p1 = unified_cosine_p1(trainer.unified(params), val);
  for (int e = 1; e <= cfg.epochs; ++e) {
    EpochStats st;
    st.epoch = e;
    st.loss = trainer.epoch(params, entries);
    if (!val.empty()) {
      st.val_p1 = unified_cosine_p1(trainer.unified(params), val);
      if (st.val_p1 > res.best_val_p1) {
        res.best_val_p1 = st.val_p1;
        res.best_epoch = e;
        res.params = params;
      }
    } else {
      res.best_epoch = e;
      res.params = params;
    }
    if (cfg.log) *cfg.log << "epoch " << st.epoch << " loss " << st.loss << " val_p1 " << st.val_p1 << '\n';
    res.curve.push_back(st);
  }
  return res;
}

struct UnsupervisedResult {
  spring::SpringParams params;
  BilingualDictionary dict;
  int rounds = 0;
  bool converged = false;
  std::vector<EpochStats> curve;
};

/// Mapped anchors for the optional interpolated re-induction.
struct MappedAnchors {
  Matrix src;
  Matrix tgt;
};

/// Alternates training on the current dictionary with re-inducing it from the
/// trained model over the initial dictionary's source words, until the
/// dictionary no longer changes or `max_rounds` rounds have run. Parameters
/// are carried over between rounds.
inline UnsupervisedResult train_unsupervised(const Matrix& ex, const Matrix& ey, const anchors::AnchorMatrix& ax,
                                             const anchors::AnchorMatrix& ay, const BilingualDictionary& init_dict,
                                             const TrainConfig& cfg, const MappedAnchors* mapped_anchors = nullptr) {
  if (init_dict.empty()) throw ConfigError("train_unsupervised: empty initial dictionary");
  if (cfg.induction.lambda > 0.0 && mapped_anchors == nullptr) {
    throw ConfigError("interpolated re-induction needs mapped anchors");
  }
  init_dict.check_ranges(ex.rows(), ey.rows());
  SpringTrainer trainer(ex, ey, ax, ay, cfg);
  UnsupervisedResult res;
  res.params = trainer.initial_params();
  res.dict = init_dict;
  const std::vector<Index> sources = init_dict.sources();

  int global_epoch = 0;
  for (int round = 1; round <= cfg.max_rounds; ++round) {
    const BilingualDictionary entries = trainer.trainable(res.dict);
    for (int e = 0; e < cfg.round_epochs; ++e) {
      EpochStats st;
      st.epoch = ++global_epoch;
      st.loss = trainer.epoch(res.params, entries);
      res.curve.push_back(st);
      if (cfg.log) *cfg.log << "round " << round << " epoch " << st.epoch << " loss " << st.loss << '\n';
    }
    res.rounds = round;

    const UnifiedSpace u = trainer.unified(res.params);
    retrieve::ScoringSpaces spaces{u.ux, u.uy, {}, {}};
    if (mapped_anchors) {
      spaces.src_anchor = mapped_anchors->src;
      spaces.tgt_anchor = mapped_anchors->tgt;
    }
    const auto best = retrieve::top1(retrieve::InterpolatedScorer(spaces, cfg.induction), sources);
    BilingualDictionary next;
    for (std::size_t i = 0; i < sources.size(); ++i) next.add(sources[i], best[i]);
    if (next.empty()) throw AbortError("train_unsupervised: induced dictionary is empty");
    const bool same = next.same_set(res.dict);
    res.dict = std::move(next);
    if (cfg.log) *cfg.log << "round " << round << " dictionary " << (same ? "stable" : "changed") << '\n';
    if (same) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace blicomb::contrastive
