#pragma once

// Seeded synthetic bilingual worlds with known ground truth.
//
// Source embeddings are unit-normalized Gaussian rows. The target language is
// a random rotation of the source plus Gaussian noise, except for words near
// a few "deformation centers", which first go through a center-specific
// affine map whose singular values are spread around 1 and which carries a
// shift. Anchors are noisy images of the undeformed embeddings under random
// row-orthonormal maps into the anchor dimension, so they carry the
// information the deformation destroyed.

#include "blicomb/anchors.hpp"
#include "blicomb/corpusio.hpp"
#include "blicomb/types.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace blicomb::synthgen {

struct SynthWorldConfig {
  Index n_words = 2000;
  Index dim = 50;
  Index anchor_dim = 64;
  std::uint64_t seed = 7;
  double noise = 0.01;            ///< per-component sigma on target embeddings
  double deform_fraction = 0.0;   ///< fraction of words receiving a local affine distortion
  int deform_centers = 4;
  double deform_spread = 0.5;     ///< singular values of the local linear part lie in [1 - s, 1 + s]
  double deform_shift = 0.5;      ///< norm of the local translation
  double anchor_fidelity = 0.45;  ///< 1 = exact linear image, 0 = pure noise
  double anchor_noise = 0.0;      ///< extra per-component sigma on anchors

  void validate() const {
    if (n_words < 10) throw ConfigError("synthetic world needs at least 10 words");
    if (dim < 1 || anchor_dim < 1 || (anchor_fidelity > 0.0 && anchor_dim < dim)) {
      throw ConfigError("anchor_dim must be >= 1, and >= dim when anchors carry signal");
    }
    if (noise < 0.0 || anchor_noise < 0.0) throw ConfigError("noise must be >= 0");
    if (deform_fraction < 0.0 || deform_fraction > 1.0) throw ConfigError("deform_fraction must lie in [0, 1]");
    if (anchor_fidelity < 0.0 || anchor_fidelity > 1.0) throw ConfigError("anchor_fidelity must lie in [0, 1]");
    if (deform_centers < 1) throw ConfigError("deform_centers must be >= 1");
  }
};

struct SynthWorld {
  EmbeddingMatrix src;
  EmbeddingMatrix tgt;
  anchors::AnchorMatrix src_anchor;
  anchors::AnchorMatrix tgt_anchor;
  BilingualDictionary gold;  ///< identity pairing, word i <-> word i
  Matrix rotation;
  std::vector<bool> deformed;
};

namespace detail {

template <typename Rng>
Matrix gaussian(Index rows, Index cols, Rng& rng, double sigma = 1.0) {
  std::normal_distribution<double> n(0.0, sigma);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

}  // namespace detail

/// Haar-distributed orthogonal matrix (QR of a Gaussian with sign correction).
template <typename Rng>
Matrix random_orthogonal(Index n, Rng& rng) {
  Eigen::MatrixXd g = detail::gaussian(n, n, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

inline SynthWorld generate(const SynthWorldConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const Index n = cfg.n_words, d = cfg.dim, dp = cfg.anchor_dim;

  SynthWorld w;
  std::vector<std::string> words(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) words[static_cast<std::size_t>(i)] = "w" + std::to_string(i);
  w.src.vocab = Vocabulary(words);
  w.tgt.vocab = Vocabulary(words);
  for (Index i = 0; i < n; ++i) w.gold.add(i, i);

  const Matrix latent = unit_rows(detail::gaussian(n, d, rng));
  w.rotation = random_orthogonal(d, rng);

  // Deformed words: the closest ones to their nearest center, up to the fraction.
  const Matrix centers = unit_rows(detail::gaussian(cfg.deform_centers, d, rng));
  const Matrix affinity = latent * centers.transpose();
  std::vector<Index> nearest(static_cast<std::size_t>(n));
  std::vector<double> closeness(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Index c = 0;
    closeness[static_cast<std::size_t>(i)] = affinity.row(i).maxCoeff(&c);
    nearest[static_cast<std::size_t>(i)] = c;
  }
  std::vector<Index> by_closeness(static_cast<std::size_t>(n));
  std::iota(by_closeness.begin(), by_closeness.end(), Index{0});
  std::stable_sort(by_closeness.begin(), by_closeness.end(), [&](Index a, Index b) {
    return closeness[static_cast<std::size_t>(a)] > closeness[static_cast<std::size_t>(b)];
  });
  const auto n_def = static_cast<std::size_t>(std::llround(cfg.deform_fraction * static_cast<double>(n)));
  w.deformed.assign(static_cast<std::size_t>(n), false);
  for (std::size_t k = 0; k < n_def; ++k) w.deformed[static_cast<std::size_t>(by_closeness[k])] = true;

  // One affine map per center: U diag(s) Vᵀ with s spread around 1, plus a shift.
  std::vector<Matrix> linear;
  std::vector<Eigen::RowVectorXd> shift;
  std::uniform_real_distribution<double> spread(1.0 - cfg.deform_spread, 1.0 + cfg.deform_spread);
  for (int c = 0; c < cfg.deform_centers; ++c) {
    Matrix u = random_orthogonal(d, rng);
    Matrix v = random_orthogonal(d, rng);
    Vector s(d);
    for (Index k = 0; k < d; ++k) s(k) = spread(rng);
    linear.push_back(u * s.asDiagonal() * v.transpose());
    Eigen::RowVectorXd t = detail::gaussian(1, d, rng).row(0);
    shift.push_back(cfg.deform_shift * t / t.norm());
  }

  Matrix target_latent = latent;
  for (Index i = 0; i < n; ++i) {
    if (!w.deformed[static_cast<std::size_t>(i)]) continue;
    const auto c = static_cast<std::size_t>(nearest[static_cast<std::size_t>(i)]);
    const Eigen::RowVectorXd center = centers.row(static_cast<Index>(c));
    target_latent.row(i) = center + (latent.row(i) - center) * linear[c] + shift[c];
  }

  w.src.data = latent;
  w.tgt.data = target_latent * w.rotation + detail::gaussian(n, d, rng, cfg.noise);

  // Anchors: fidelity-weighted mix of the true (undeformed) embedding's image
  // and independent noise of comparable norm.
  auto make_anchor = [&](void) {
    Matrix a = (1.0 - cfg.anchor_fidelity) * detail::gaussian(n, dp, rng, 1.0 / std::sqrt(static_cast<double>(dp)));
    if (cfg.anchor_fidelity > 0.0) {
      const Matrix proj = random_orthogonal(dp, rng).topRows(d);
      a += cfg.anchor_fidelity * (latent * proj);
    }
    if (cfg.anchor_noise > 0.0) a += detail::gaussian(n, dp, rng, cfg.anchor_noise);
    anchors::AnchorMatrix out;
    out.data = std::move(a);
    out.coverage.assign(static_cast<std::size_t>(n), 1);
    return out;
  };
  w.src_anchor = make_anchor();
  w.tgt_anchor = make_anchor();
  return w;
}

/// Deterministic split of the gold pairs into train / validation / test.
struct Split {
  BilingualDictionary train;
  BilingualDictionary val;
  BilingualDictionary test;
};

inline Split split_gold(const BilingualDictionary& gold, std::size_t n_train, std::size_t n_val, std::size_t n_test,
                        std::uint64_t seed) {
  if (n_train + n_val + n_test > gold.size()) throw ConfigError("split sizes exceed the gold dictionary");
  std::vector<std::size_t> order(gold.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Split s;
  for (std::size_t k = 0; k < n_train + n_val + n_test; ++k) {
    const auto& p = gold[order[k]];
    auto& dst = k < n_train ? s.train : (k < n_train + n_val ? s.val : s.test);
    dst.add(p.src, p.tgt);
  }
  return s;
}

/// Writes a token-context dump whose per-context means average back to the
/// given anchors: `contexts` contexts of `bpes` subword vectors each, with
/// zero-sum perturbations inside every context and across contexts.
inline void write_context_dump(const std::string& path, const Vocabulary& vocab, const anchors::AnchorMatrix& a,
                               int contexts, int bpes, std::uint64_t seed, double jitter = 0.05) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  corpusio::write_context_header(out, static_cast<int>(a.dim()));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, jitter);
  const Index dp = a.dim();
  corpusio::ContextRecord r;
  for (Index i = 0; i < vocab.size(); ++i) {
    Matrix ctx_dev(contexts, dp);
    for (int c = 0; c < contexts; ++c)
      for (Index k = 0; k < dp; ++k) ctx_dev(c, k) = nd(rng);
    ctx_dev.rowwise() -= ctx_dev.colwise().mean();
    for (int c = 0; c < contexts; ++c) {
      Matrix bpe_dev(bpes, dp);
      for (int b = 0; b < bpes; ++b)
        for (Index k = 0; k < dp; ++k) bpe_dev(b, k) = nd(rng);
      bpe_dev.rowwise() -= bpe_dev.colwise().mean();
      for (int b = 0; b < bpes; ++b) {
        r.word = vocab.word(i);
        r.context_id = c;
        r.bpe_index = b;
        r.bpe_count = bpes;
        Eigen::RowVectorXd v = a.data.row(i) + ctx_dev.row(c) + bpe_dev.row(b);
        r.vector.assign(v.data(), v.data() + dp);
        corpusio::write_context_record(out, r);
      }
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

/// Writes embeddings, anchors and the dictionary split into `dir`.
inline void write_world(const SynthWorld& w, const Split& split, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto p = [&](const char* name) { return (fs::path(dir) / name).string(); };
  corpusio::save_embeddings(p("src.emb"), w.src.vocab, w.src.data);
  corpusio::save_embeddings(p("tgt.emb"), w.tgt.vocab, w.tgt.data);
  corpusio::save_embeddings(p("src.anchors"), w.src.vocab, w.src_anchor.data);
  corpusio::save_embeddings(p("tgt.anchors"), w.tgt.vocab, w.tgt_anchor.data);
  corpusio::save_dictionary(p("train.dict"), split.train, w.src.vocab, w.tgt.vocab);
  corpusio::save_dictionary(p("val.dict"), split.val, w.src.vocab, w.tgt.vocab);
  corpusio::save_dictionary(p("test.dict"), split.test, w.src.vocab, w.tgt.vocab);
  corpusio::save_dictionary(p("gold.dict"), w.gold, w.src.vocab, w.tgt.vocab);
}

}  // namespace blicomb::synthgen
