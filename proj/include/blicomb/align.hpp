#pragma once

// Orthogonal mapping of two spaces into a shared one: preprocessing,
// supervised Procrustes and the unsupervised self-learning loop.

#include "blicomb/retrieve.hpp"
#include "blicomb/types.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

namespace blicomb::align {

struct NormalizeConfig {
  bool unit = true;
  bool center = true;
};

/// unit length -> per-dimension mean centering -> unit length. Zero rows stay
/// zero and are left out of the mean.
inline Matrix normalize(const Matrix& m, const NormalizeConfig& cfg = {}) {
  Matrix out = cfg.unit ? unit_rows(m) : m;
  if (cfg.center) {
    std::vector<bool> zero(static_cast<std::size_t>(out.rows()));
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(out.cols());
    Index live = 0;
    for (Index i = 0; i < out.rows(); ++i) {
      zero[static_cast<std::size_t>(i)] = out.row(i).squaredNorm() == 0.0;
      if (!zero[static_cast<std::size_t>(i)]) {
        mean += out.row(i);
        ++live;
      }
    }
    if (live > 0) {
      mean /= static_cast<double>(live);
      for (Index i = 0; i < out.rows(); ++i) {
        if (!zero[static_cast<std::size_t>(i)]) out.row(i) -= mean;
      }
    }
  }
  if (cfg.unit) out = unit_rows(out);
  return out;
}

/// Sum over dictionary pairs of cos(x_i Wx, y_i Wy).
inline double mapping_objective(const Matrix& x, const Matrix& y, const BilingualDictionary& dict,
                                const MappingPair& map) {
  double total = 0.0;
  for (const auto& p : dict) {
    Eigen::RowVectorXd a = x.row(p.src) * map.wx;
    Eigen::RowVectorXd b = y.row(p.tgt) * map.wy;
    const double n = a.norm() * b.norm();
    if (n > 0.0) total += a.dot(b) / n;
  }
  return total;
}

/// Wx = U, Wy = V for U S Vᵀ = Dxᵀ Dy, with Dx, Dy the dictionary-selected rows.
inline MappingPair procrustes(const Matrix& x, const Matrix& y, const BilingualDictionary& dict) {
  if (dict.empty()) throw ConfigError("procrustes: empty dictionary");
  if (x.cols() != y.cols()) {
    throw DimensionError("procrustes: source dim " + std::to_string(x.cols()) + " != target dim " +
                         std::to_string(y.cols()));
  }
  dict.check_ranges(x.rows(), y.rows());
  const Index n = x.cols();
  Matrix cross = Matrix::Zero(n, n);
  for (const auto& p : dict) cross.noalias() += x.row(p.src).transpose() * y.row(p.tgt);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixU(), svd.matrixV()};
}

/// Pairs every token present in both vocabularies with itself, in source order.
inline BilingualDictionary seed_dictionary_identical_strings(const Vocabulary& src, const Vocabulary& tgt) {
  BilingualDictionary out;
  for (Index i = 0; i < src.size(); ++i) {
    const Index j = tgt.find(src.word(i));
    if (j >= 0) out.add(i, j);
  }
  if (out.empty()) throw ConfigError("identical-string seeding: vocabularies share no token");
  return out;
}

enum class InductionDirection { forward, union_both, intersection };

struct SelfLearnConfig {
  int max_iters = 20;
  int csls_k = retrieve::kDefaultCslsK;
  InductionDirection direction = InductionDirection::union_both;
  /// Only the first `vocab_cutoff` rows of each side take part in re-induction.
  Index vocab_cutoff = 20000;
  std::ostream* log = nullptr;
};

struct SelfLearnResult {
  MappingPair mapping;
  BilingualDictionary dict;
  int iterations = 0;
  bool converged = false;
};

/// Re-induces a dictionary from the mapped spaces with CSLS top-1 retrieval.
inline BilingualDictionary induce_dictionary(const Matrix& xm, const Matrix& ym, const SelfLearnConfig& cfg) {
  const Index ns = std::min(cfg.vocab_cutoff, xm.rows());
  const Index nt = std::min(cfg.vocab_cutoff, ym.rows());
  retrieve::ScoringSpaces spaces{xm.topRows(ns), ym.topRows(nt), {}, {}};
  retrieve::SimilarityConfig sim{0.0, cfg.csls_k, retrieve::SimilarityMode::csls, retrieve::CslsComposition::per_term};

  std::vector<TranslationPair> fwd, bwd;
  {
    std::vector<Index> q(static_cast<std::size_t>(ns));
    for (Index i = 0; i < ns; ++i) q[static_cast<std::size_t>(i)] = i;
    auto best = retrieve::top1(retrieve::InterpolatedScorer(spaces, sim), q);
    for (Index i = 0; i < ns; ++i) fwd.push_back({i, best[static_cast<std::size_t>(i)]});
  }
  if (cfg.direction != InductionDirection::forward) {
    std::vector<Index> q(static_cast<std::size_t>(nt));
    for (Index j = 0; j < nt; ++j) q[static_cast<std::size_t>(j)] = j;
    auto best = retrieve::top1(retrieve::InterpolatedScorer(spaces.reversed(), sim), q);
    for (Index j = 0; j < nt; ++j) bwd.push_back({best[static_cast<std::size_t>(j)], j});
  }

  std::vector<TranslationPair> out;
  switch (cfg.direction) {
    case InductionDirection::forward:
      out = fwd;
      break;
    case InductionDirection::union_both:
      out = fwd;
      out.insert(out.end(), bwd.begin(), bwd.end());
      break;
    case InductionDirection::intersection: {
      std::sort(bwd.begin(), bwd.end());
      for (const auto& p : fwd) {
        if (std::binary_search(bwd.begin(), bwd.end(), p)) out.push_back(p);
      }
      break;
    }
  }
  return BilingualDictionary(std::move(out)).canonical();
}

/// Alternates Procrustes on the current dictionary with CSLS re-induction
/// until the induced dictionary equals the previous one (as a set) or
/// `max_iters` fits have been made.
inline SelfLearnResult self_learn(const Matrix& x, const Matrix& y, const BilingualDictionary& seed,
                                  const SelfLearnConfig& cfg = {}) {
  if (seed.empty()) throw ConfigError("self_learn: empty seed dictionary");
  if (cfg.max_iters < 1) throw ConfigError("self_learn: max_iters must be >= 1");
  SelfLearnResult res;
  BilingualDictionary current = seed.canonical();
  for (int it = 1; it <= cfg.max_iters; ++it) {
    res.mapping = procrustes(x, y, current);
    Matrix xm = x * res.mapping.wx;
    Matrix ym = y * res.mapping.wy;
    BilingualDictionary next = induce_dictionary(xm, ym, cfg);
    if (next.empty()) throw AbortError("self_learn: induced dictionary is empty at iteration " + std::to_string(it));
    res.iterations = it;
    if (cfg.log) *cfg.log << "self_learn iter=" << it << " pairs=" << next.size() << '\n';
    const bool same = next == current;
    current = std::move(next);
    if (same) {
      res.converged = true;
      break;
    }
  }
  res.dict = std::move(current);
  return res;
}

}  // namespace blicomb::align
