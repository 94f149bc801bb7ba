#pragma once

// The spring network: a two-layer tanh network mapping a word's anchor to a
// bounded offset that is added, scaled per dimension by gamma, to its mapped
// static embedding.
//
//   hidden = tanh(A W0 + b0)          (anchor dim -> embedding dim)
//   offset = tanh(hidden W1 + b1)
//   U      = E' + offset ⊙ gamma

#include "blicomb/types.hpp"

#include <cmath>
#include <random>
#include <string>

namespace blicomb::spring {

inline constexpr double kDefaultGammaInit = 0.1;

/// Weights of one language's spring plus its offset scale gamma.
struct SpringNet {
  Matrix w0;      // anchor_dim x dim
  Vector b0;      // dim
  Matrix w1;      // dim x dim
  Vector b1;      // dim
  Vector gamma;   // dim

  Index anchor_dim() const noexcept { return w0.rows(); }
  Index dim() const noexcept { return w0.cols(); }

  static SpringNet zeros(Index anchor_dim, Index dim) {
    return {Matrix::Zero(anchor_dim, dim), Vector::Zero(dim), Matrix::Zero(dim, dim), Vector::Zero(dim),
            Vector::Zero(dim)};
  }

  /// Weights uniform in ±1/sqrt(fan_in), zero biases, constant gamma.
  template <typename Rng>
  static SpringNet initialized(Index anchor_dim, Index dim, Rng& rng, double gamma_init = kDefaultGammaInit) {
    SpringNet net = zeros(anchor_dim, dim);
    auto fill = [&rng](Matrix& m, double bound) {
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
    };
    fill(net.w0, 1.0 / std::sqrt(static_cast<double>(anchor_dim)));
    fill(net.w1, 1.0 / std::sqrt(static_cast<double>(dim)));
    net.gamma.setConstant(gamma_init);
    return net;
  }

  Index parameter_count() const noexcept { return w0.size() + b0.size() + w1.size() + b1.size() + gamma.size(); }

  void validate() const {
    const Index d = dim();
    if (b0.size() != d || w1.rows() != d || w1.cols() != d || b1.size() != d || gamma.size() != d) {
      throw DimensionError("spring network parameters have inconsistent shapes");
    }
    if (!w0.allFinite() || !b0.allFinite() || !w1.allFinite() || !b1.allFinite() || !gamma.allFinite()) {
      throw DimensionError("spring network parameters contain non-finite values");
    }
  }

  /// Applies `fn(param, other_param)` field by field.
  template <typename Fn>
  void zip(SpringNet& other, Fn&& fn) {
    fn(w0, other.w0);
    fn(b0, other.b0);
    fn(w1, other.w1);
    fn(b1, other.b1);
    fn(gamma, other.gamma);
  }

  bool operator==(const SpringNet& o) const {
    return w0 == o.w0 && b0 == o.b0 && w1 == o.w1 && b1 == o.b1 && gamma == o.gamma;
  }
};

/// Source-side (x) and target-side (y) springs.
struct SpringParams {
  SpringNet x;
  SpringNet y;

  Index parameter_count() const noexcept { return x.parameter_count() + y.parameter_count(); }

  template <typename Rng>
  static SpringParams initialized(Index anchor_dim_x, Index anchor_dim_y, Index dim, Rng& rng,
                                  double gamma_init = kDefaultGammaInit) {
    SpringParams p;
    p.x = SpringNet::initialized(anchor_dim_x, dim, rng, gamma_init);
    p.y = SpringNet::initialized(anchor_dim_y, dim, rng, gamma_init);
    return p;
  }

  bool operator==(const SpringParams&) const = default;
};

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
  Matrix hidden;
  Matrix offset;
};

inline ForwardCache spring_forward_cached(const Matrix& anchors, const SpringNet& net) {
  if (anchors.cols() != net.anchor_dim()) {
    throw DimensionError("spring_forward: anchor dim " + std::to_string(anchors.cols()) + " != " +
                         std::to_string(net.anchor_dim()));
  }
  ForwardCache c;
  c.hidden = anchors * net.w0;
  c.hidden.rowwise() += net.b0.transpose();
  c.hidden = c.hidden.array().tanh();
  c.offset = c.hidden * net.w1;
  c.offset.rowwise() += net.b1.transpose();
  c.offset = c.offset.array().tanh();
  return c;
}

/// Offsets in (-1, 1), one row per anchor row.
inline Matrix spring_forward(const Matrix& anchors, const SpringNet& net) {
  return spring_forward_cached(anchors, net).offset;
}

/// U = E' + offsets ⊙ gamma, row by row.
inline Matrix unify(const Matrix& mapped, const Matrix& offsets, const Vector& gamma) {
  if (mapped.rows() != offsets.rows() || mapped.cols() != offsets.cols()) {
    throw DimensionError("unify: embedding and offset shapes differ");
  }
  if (gamma.size() != mapped.cols()) throw DimensionError("unify: gamma length mismatch");
  Matrix out = offsets;
  out.array().rowwise() *= gamma.transpose().array();
  out += mapped;
  return out;
}

inline Matrix unify(const Matrix& mapped, const Matrix& anchors, const SpringNet& net) {
  if (mapped.rows() != anchors.rows()) throw DimensionError("unify: embedding and anchor row counts differ");
  return unify(mapped, spring_forward(anchors, net), net.gamma);
}

/// Gradients of sum(upstream ⊙ U) with respect to every field of `net`,
/// holding the mapped embeddings and the anchors fixed.
inline SpringNet spring_backward(const Matrix& anchors, const Matrix& upstream, const SpringNet& net,
                                 const ForwardCache& cache) {
  if (upstream.rows() != anchors.rows() || upstream.cols() != net.dim()) {
    throw DimensionError("spring_backward: upstream gradient shape mismatch");
  }
  SpringNet g;
  g.gamma = (upstream.array() * cache.offset.array()).colwise().sum().transpose();
  Matrix d_out = upstream;
  d_out.array().rowwise() *= net.gamma.transpose().array();
  Matrix d_z1 = d_out.array() * (1.0 - cache.offset.array().square());
  g.w1 = cache.hidden.transpose() * d_z1;
  g.b1 = d_z1.colwise().sum().transpose();
  Matrix d_hidden = d_z1 * net.w1.transpose();
  Matrix d_z0 = d_hidden.array() * (1.0 - cache.hidden.array().square());
  g.w0 = anchors.transpose() * d_z0;
  g.b0 = d_z0.colwise().sum().transpose();
  return g;
}

inline SpringNet spring_backward(const Matrix& anchors, const Matrix& upstream, const SpringNet& net) {
  return spring_backward(anchors, upstream, net, spring_forward_cached(anchors, net));
}

}  // namespace blicomb::spring
