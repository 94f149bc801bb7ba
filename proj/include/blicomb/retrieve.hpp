#pragma once

// Cosine and CSLS retrieval, interpolated scoring over the unified and the
// mapped-anchor spaces, lambda tuning and P@1.
//
// CSLS(x, y) = 2 cos(x, y) - r_T(x) - r_S(y), where r_T(x) is the mean
// similarity of x to its k nearest targets and r_S(y) the mean similarity of
// y to its k nearest sources.

#include "blicomb/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace blicomb::retrieve {

enum class SimilarityMode { cosine, csls };

/// Where the CSLS correction is applied when two similarity terms are mixed.
enum class CslsComposition {
  per_term,   ///< adjust each cosine term, then weight and sum
  after_sum,  ///< sum the raw cosines, then adjust the mixture
};

inline constexpr int kDefaultCslsK = 10;
inline constexpr double kDefaultSupervisedLambda = 0.1;

struct SimilarityConfig {
  double lambda = 0.0;
  int k = kDefaultCslsK;
  SimilarityMode mode = SimilarityMode::csls;
  CslsComposition composition = CslsComposition::per_term;

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (mode == SimilarityMode::csls && k < 1) throw ConfigError("CSLS k must be >= 1");
  }
};

/// Full cosine matrix between the rows of `src` and `tgt`. Zero rows score 0.
inline Matrix cosine_matrix(const Matrix& src, const Matrix& tgt) {
  if (src.cols() != tgt.cols()) throw DimensionError("cosine_matrix: column mismatch");
  return unit_rows(src) * unit_rows(tgt).transpose();
}

namespace detail {

inline double mean_top_k(std::vector<double>& values, int k) {
  auto kk = static_cast<std::ptrdiff_t>(k);
  std::nth_element(values.begin(), values.begin() + (kk - 1), values.end(), std::greater<>());
  double s = 0.0;
  for (std::ptrdiff_t i = 0; i < kk; ++i) s += values[static_cast<std::size_t>(i)];
  return s / static_cast<double>(k);
}

inline void check_k(int k, Index n_src, Index n_tgt) {
  if (k < 1 || k >= n_src || k >= n_tgt) {
    throw ConfigError("CSLS k=" + std::to_string(k) + " out of range for vocabularies of size " +
                      std::to_string(n_src) + " and " + std::to_string(n_tgt));
  }
}

/// One weighted cosine term over unit-row matrices.
struct Term {
  const Matrix* src;
  const Matrix* tgt;
  double weight;
};

inline constexpr Index kChunkRows = 512;

/// For every row q of the `query_side` matrices: mean of the k largest values
/// of sum_t w_t <q_t, b_t> over all rows b of the `base_side`. Chunked so the
/// full similarity matrix is never materialized.
inline Vector knn_mean(const std::vector<Term>& terms, bool query_is_src, int k) {
  const Matrix& q0 = query_is_src ? *terms.front().src : *terms.front().tgt;
  const Matrix& b0 = query_is_src ? *terms.front().tgt : *terms.front().src;
  const Index nq = q0.rows(), nb = b0.rows();
  Vector out(nq);
  std::vector<double> buf(static_cast<std::size_t>(nb));
  for (Index start = 0; start < nq; start += kChunkRows) {
    const Index len = std::min(kChunkRows, nq - start);
    Matrix block = Matrix::Zero(len, nb);
    for (const auto& t : terms) {
      if (t.weight == 0.0) continue;
      const Matrix& q = query_is_src ? *t.src : *t.tgt;
      const Matrix& b = query_is_src ? *t.tgt : *t.src;
      block.noalias() += t.weight * (q.middleRows(start, len) * b.transpose());
    }
    for (Index i = 0; i < len; ++i) {
      for (Index j = 0; j < nb; ++j) buf[static_cast<std::size_t>(j)] = block(i, j);
      out(start + i) = mean_top_k(buf, k);
    }
  }
  return out;
}

}  // namespace detail

/// CSLS adjustment of a full source-by-target similarity matrix.
inline Matrix csls_scores(const Matrix& sim, int k) {
  detail::check_k(k, sim.rows(), sim.cols());
  Vector r_tgt(sim.rows());  // per source row, over target columns
  Vector r_src(sim.cols());  // per target column, over source rows
  std::vector<double> buf;
  for (Index i = 0; i < sim.rows(); ++i) {
    buf.assign(sim.row(i).data(), sim.row(i).data() + sim.cols());
    r_tgt(i) = detail::mean_top_k(buf, k);
  }
  buf.resize(static_cast<std::size_t>(sim.rows()));
  for (Index j = 0; j < sim.cols(); ++j) {
    for (Index i = 0; i < sim.rows(); ++i) buf[static_cast<std::size_t>(i)] = sim(i, j);
    r_src(j) = detail::mean_top_k(buf, k);
  }
  Matrix out = 2.0 * sim;
  out.colwise() -= r_tgt;
  out.rowwise() -= r_src.transpose();
  return out;
}

/// The four spaces retrieval works over. Rows align with the source and
/// target vocabularies. The anchor pair may be left empty, in which case only
/// lambda = 0 is allowed.
struct ScoringSpaces {
  Matrix src_unified;
  Matrix tgt_unified;
  Matrix src_anchor;
  Matrix tgt_anchor;

  bool has_anchors() const noexcept { return src_anchor.size() > 0 && tgt_anchor.size() > 0; }

  /// Same spaces with source and target roles exchanged.
  ScoringSpaces reversed() const { return {tgt_unified, src_unified, tgt_anchor, src_anchor}; }
};

struct Candidate {
  Index target = 0;
  double score = 0.0;
  bool operator==(const Candidate&) const = default;
};

/// Scores source queries against every target word:
///   S = sim_u(x, y) + lambda * sim_a(x, y)
/// where each sim is cosine or CSLS per the config. Holds unit-row copies of
/// the spaces plus the CSLS radii, so it is cheap to query repeatedly.
class InterpolatedScorer {
 public:
  InterpolatedScorer(const ScoringSpaces& spaces, const SimilarityConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    if (spaces.src_unified.cols() != spaces.tgt_unified.cols()) {
      throw DimensionError("unified spaces differ in dimension");
    }
    su_ = unit_rows(spaces.src_unified);
    tu_ = unit_rows(spaces.tgt_unified);
    if (spaces.has_anchors()) {
      if (spaces.src_anchor.rows() != su_.rows() || spaces.tgt_anchor.rows() != tu_.rows()) {
        throw DimensionError("anchor rows do not align with the unified spaces");
      }
      if (spaces.src_anchor.cols() != spaces.tgt_anchor.cols()) {
        throw DimensionError("anchor spaces differ in dimension");
      }
      sa_ = unit_rows(spaces.src_anchor);
      ta_ = unit_rows(spaces.tgt_anchor);
    }
    if (cfg_.mode == SimilarityMode::csls) detail::check_k(cfg_.k, su_.rows(), tu_.rows());
    set_lambda(cfg_.lambda);
  }

  const SimilarityConfig& config() const noexcept { return cfg_; }
  Index source_size() const noexcept { return su_.rows(); }
  Index target_size() const noexcept { return tu_.rows(); }

  /// Changes lambda. With per-term CSLS the radii do not depend on lambda and
  /// are reused; after-sum CSLS recomputes them.
  void set_lambda(double lambda) {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (lambda > 0.0 && sa_.size() == 0) throw ConfigError("lambda > 0 requires anchor spaces");
    cfg_.lambda = lambda;
    if (cfg_.mode != SimilarityMode::csls) return;
    using detail::Term;
    if (cfg_.composition == CslsComposition::per_term) {
      if (r_tgt_u_.size() == 0) {
        std::vector<Term> u{{&su_, &tu_, 1.0}};
        r_tgt_u_ = detail::knn_mean(u, true, cfg_.k);
        r_src_u_ = detail::knn_mean(u, false, cfg_.k);
      }
      if (sa_.size() > 0 && r_tgt_a_.size() == 0) {
        std::vector<Term> a{{&sa_, &ta_, 1.0}};
        r_tgt_a_ = detail::knn_mean(a, true, cfg_.k);
        r_src_a_ = detail::knn_mean(a, false, cfg_.k);
      }
    } else {
      std::vector<Term> terms{{&su_, &tu_, 1.0}};
      if (lambda > 0.0) terms.push_back({&sa_, &ta_, lambda});
      r_tgt_u_ = detail::knn_mean(terms, true, cfg_.k);
      r_src_u_ = detail::knn_mean(terms, false, cfg_.k);
    }
  }

  /// Score rows for `queries` (source indices), one row per query.
  Matrix scores(const std::vector<Index>& queries) const {
    Matrix qu = select_rows(su_, queries);
    Matrix out = unified_term(qu, queries);
    if (cfg_.lambda > 0.0) {
      Matrix qa = select_rows(sa_, queries);
      if (cfg_.mode == SimilarityMode::csls && cfg_.composition == CslsComposition::after_sum) {
        out.noalias() += (2.0 * cfg_.lambda) * (qa * ta_.transpose());
      } else {
        out.noalias() += cfg_.lambda * anchor_term(qa, queries);
      }
    }
    return out;
  }

  Eigen::RowVectorXd scores(Index query) const { return scores(std::vector<Index>{query}).row(0); }

  /// Unified and anchor terms separately (each already CSLS-adjusted in
  /// per-term mode), so callers can sweep lambda without rescoring.
  std::pair<Matrix, Matrix> term_scores(const std::vector<Index>& queries) const {
    if (cfg_.mode == SimilarityMode::csls && cfg_.composition == CslsComposition::after_sum) {
      throw ConfigError("term_scores is undefined for after-sum CSLS");
    }
    Matrix qu = select_rows(su_, queries);
    Matrix u = unified_term(qu, queries);
    Matrix a;
    if (sa_.size() > 0) a = anchor_term(select_rows(sa_, queries), queries);
    return {std::move(u), std::move(a)};
  }

 private:
  Matrix unified_term(const Matrix& qu, const std::vector<Index>& queries) const {
    Matrix out = qu * tu_.transpose();
    if (cfg_.mode == SimilarityMode::csls) {
      out *= 2.0;
      for (std::size_t i = 0; i < queries.size(); ++i) out.row(static_cast<Index>(i)).array() -= r_tgt_u_(queries[i]);
      out.rowwise() -= r_src_u_.transpose();
    }
    return out;
  }

  Matrix anchor_term(const Matrix& qa, const std::vector<Index>& queries) const {
    Matrix out = qa * ta_.transpose();
    if (cfg_.mode == SimilarityMode::csls) {
      out *= 2.0;
      for (std::size_t i = 0; i < queries.size(); ++i) out.row(static_cast<Index>(i)).array() -= r_tgt_a_(queries[i]);
      out.rowwise() -= r_src_a_.transpose();
    }
    return out;
  }

  SimilarityConfig cfg_;
  Matrix su_, tu_, sa_, ta_;
  Vector r_tgt_u_, r_src_u_, r_tgt_a_, r_src_a_;
};

/// Interpolated score vector for a single source word.
inline Eigen::RowVectorXd interpolated_scores(Index query, const ScoringSpaces& spaces,
                                              const SimilarityConfig& cfg) {
  return InterpolatedScorer(spaces, cfg).scores(query);
}

namespace detail {

/// Higher score first, lower index on ties.
inline bool ranks_before(double sa, Index ia, double sb, Index ib) {
  return sa > sb || (sa == sb && ia < ib);
}

inline Index argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Index best = 0;
  for (Index j = 1; j < row.size(); ++j) {
    if (ranks_before(row(j), j, row(best), best)) best = j;
  }
  return best;
}

inline std::vector<Candidate> top_n_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, Index n) {
  std::vector<Index> idx(static_cast<std::size_t>(row.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  const auto cut = static_cast<std::ptrdiff_t>(std::min<Index>(n, row.size()));
  std::partial_sort(idx.begin(), idx.begin() + cut, idx.end(),
                    [&](Index a, Index b) { return ranks_before(row(a), a, row(b), b); });
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(cut));
  for (std::ptrdiff_t i = 0; i < cut; ++i) {
    const Index j = idx[static_cast<std::size_t>(i)];
    out.push_back({j, row(j)});
  }
  return out;
}

template <typename Fn>
void for_each_chunk(const std::vector<Index>& queries, Fn&& fn) {
  for (std::size_t start = 0; start < queries.size(); start += static_cast<std::size_t>(kChunkRows)) {
    const std::size_t end = std::min(queries.size(), start + static_cast<std::size_t>(kChunkRows));
    std::vector<Index> chunk(queries.begin() + static_cast<std::ptrdiff_t>(start),
                             queries.begin() + static_cast<std::ptrdiff_t>(end));
    fn(start, chunk);
  }
}

}  // namespace detail

/// Ranked top-`n` targets per query; `n` larger than the vocabulary returns
/// the full ranking.
inline std::vector<std::vector<Candidate>> induce(const InterpolatedScorer& scorer,
                                                  const std::vector<Index>& queries, Index n = 1) {
  std::vector<std::vector<Candidate>> out(queries.size());
  detail::for_each_chunk(queries, [&](std::size_t start, const std::vector<Index>& chunk) {
    Matrix s = scorer.scores(chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) out[start + i] = detail::top_n_row(s.row(static_cast<Index>(i)), n);
  });
  return out;
}

inline std::vector<Index> top1(const InterpolatedScorer& scorer, const std::vector<Index>& queries) {
  std::vector<Index> out(queries.size());
  detail::for_each_chunk(queries, [&](std::size_t start, const std::vector<Index>& chunk) {
    Matrix s = scorer.scores(chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) out[start + i] = detail::argmax_row(s.row(static_cast<Index>(i)));
  });
  return out;
}

struct Prediction {
  Index src = 0;
  Index tgt = 0;
};

/// Percentage of distinct gold source words whose prediction is one of their
/// gold targets. A gold source without a prediction counts as wrong.
inline double precision_at_1(const std::vector<Prediction>& predictions, const BilingualDictionary& gold) {
  auto targets = gold.targets_by_source();
  if (targets.empty()) throw ConfigError("P@1 over zero queries");
  std::unordered_map<Index, Index> first;
  for (const auto& p : predictions) {
    if (!targets.count(p.src)) {
      throw ConfigError("prediction for source index " + std::to_string(p.src) + " not in the gold dictionary");
    }
    first.try_emplace(p.src, p.tgt);
  }
  std::size_t correct = 0;
  for (const auto& [src, tg] : targets) {
    auto it = first.find(src);
    if (it != first.end() && std::find(tg.begin(), tg.end(), it->second) != tg.end()) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(targets.size());
}

/// P@1 of top-1 retrieval over the distinct sources of `gold`.
inline double evaluate_p1(const InterpolatedScorer& scorer, const BilingualDictionary& gold) {
  const auto queries = gold.sources();
  const auto best = top1(scorer, queries);
  std::vector<Prediction> preds;
  preds.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) preds.push_back({queries[i], best[i]});
  return precision_at_1(preds, gold);
}

/// 0.05, 0.06, ..., 0.30.
inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = 5; i <= 30; ++i) grid.push_back(i / 100.0);
  return grid;
}

struct LambdaSearch {
  double lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> accuracy;  ///< per grid point; P@1 (supervised) or round-trip % (unsupervised)
};

namespace detail {

inline LambdaSearch pick_best(std::vector<double> grid, std::vector<double> acc) {
  // Strict improvement only, so ties resolve to the smaller lambda.
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  std::size_t best = order.front();
  for (std::size_t i : order) {
    if (acc[i] > acc[best]) best = i;
  }
  LambdaSearch out;
  out.lambda = grid[best];
  out.grid = std::move(grid);
  out.accuracy = std::move(acc);
  return out;
}

}  // namespace detail

/// Grid lambda maximizing validation P@1; ties go to the smaller lambda.
inline LambdaSearch tune_lambda_supervised(const BilingualDictionary& val, const ScoringSpaces& spaces,
                                           SimilarityConfig cfg,
                                           std::vector<double> grid = default_lambda_grid()) {
  if (grid.empty()) throw ConfigError("empty lambda grid");
  cfg.lambda = 0.0;
  InterpolatedScorer scorer(spaces, cfg);
  std::vector<double> acc;
  for (double l : grid) {
    scorer.set_lambda(l);
    acc.push_back(evaluate_p1(scorer, val));
  }
  return detail::pick_best(std::move(grid), std::move(acc));
}

/// Round-trip lambda selection without gold data: each source word x goes to
/// y' with the forward scorer, y' comes back to x'' with the backward scorer
/// at the same lambda, and the lambda with the most x'' == x wins.
/// `backward` has the target language as its source side.
inline LambdaSearch tune_lambda_unsupervised(const std::vector<Index>& val_sources, const ScoringSpaces& forward,
                                             const ScoringSpaces& backward, SimilarityConfig cfg,
                                             std::vector<double> grid = default_lambda_grid()) {
  if (grid.empty()) throw ConfigError("empty lambda grid");
  if (val_sources.empty()) throw ConfigError("no validation source words");
  cfg.lambda = 0.0;
  InterpolatedScorer fwd(forward, cfg);
  InterpolatedScorer bwd(backward, cfg);
  if (fwd.source_size() != bwd.target_size() || fwd.target_size() != bwd.source_size()) {
    throw DimensionError("forward and backward spaces do not mirror each other");
  }
  std::vector<double> acc;
  for (double l : grid) {
    fwd.set_lambda(l);
    bwd.set_lambda(l);
    const auto there = top1(fwd, val_sources);
    const auto back = top1(bwd, there);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < val_sources.size(); ++i) hits += back[i] == val_sources[i] ? 1 : 0;
    acc.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(val_sources.size()));
  }
  return detail::pick_best(std::move(grid), std::move(acc));
}

}  // namespace blicomb::retrieve
