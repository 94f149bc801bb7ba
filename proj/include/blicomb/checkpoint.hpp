#pragma once

// Versioned text checkpoint: named sections with their dimensions followed by
// rows of shortest round-trip decimals, so load(save(c)) is exact.
//
//   blicomb-checkpoint 1
//   lambda <value>
//   csls_k <int>
//   normalize <unit 0|1> <center 0|1>
//   matrix embed.wx <rows> <cols>
//   ...rows...
//   matrix embed.wy / anchor.wx / anchor.wy
//   spring 0|1
//   matrix spring.x.w0, vector spring.x.b0, matrix spring.x.w1,
//   vector spring.x.b1, vector spring.x.gamma, then the same for spring.y
//   end

#include "blicomb/align.hpp"
#include "blicomb/corpusio.hpp"
#include "blicomb/spring.hpp"
#include "blicomb/types.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace blicomb {

inline constexpr const char* kCheckpointTag = "blicomb-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  MappingPair embed;
  MappingPair anchor;
  std::optional<spring::SpringParams> spring;
  double lambda = 0.0;
  int csls_k = 10;
  align::NormalizeConfig normalize{};

  Index embedding_dim() const noexcept { return embed.wx.rows(); }
  Index anchor_dim() const noexcept { return anchor.wx.rows(); }

  /// Internal shape consistency.
  void validate() const {
    auto square = [](const Matrix& m, Index n, const char* name) {
      if (m.rows() != n || m.cols() != n) {
        throw DimensionError(std::string(name) + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                             ", expected " + std::to_string(n) + "x" + std::to_string(n));
      }
    };
    const Index d = embedding_dim(), dp = anchor_dim();
    square(embed.wx, d, "embed.wx");
    square(embed.wy, d, "embed.wy");
    square(anchor.wx, dp, "anchor.wx");
    square(anchor.wy, dp, "anchor.wy");
    if (spring) {
      for (const auto* net : {&spring->x, &spring->y}) {
        net->validate();
        if (net->dim() != d || net->anchor_dim() != dp) throw DimensionError("spring shape disagrees with mapping dims");
      }
    }
  }

  /// Throws unless the checkpoint fits spaces of the given dimensions.
  void check_compatible(Index embedding_dim_in, Index anchor_dim_in) const {
    if (embedding_dim() != embedding_dim_in) {
      throw DimensionError("checkpoint maps " + std::to_string(embedding_dim()) + "-dim embeddings, input has d=" +
                           std::to_string(embedding_dim_in));
    }
    if (anchor_dim() != anchor_dim_in) {
      throw DimensionError("checkpoint maps " + std::to_string(anchor_dim()) + "-dim anchors, input has d'=" +
                           std::to_string(anchor_dim_in));
    }
  }
};

namespace detail {

inline void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << corpusio::detail::format_double(m(i, j));
    out << '\n';
  }
}

inline void write_vector(std::ostream& out, const std::string& name, const Vector& v) {
  out << "vector " << name << ' ' << v.size() << '\n';
  for (Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << corpusio::detail::format_double(v(i));
  out << '\n';
}

class CheckpointReader {
 public:
  CheckpointReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::vector<std::string_view> line() {
    while (std::getline(in_, buf_)) {
      ++lineno_;
      auto toks = corpusio::detail::split_ws(buf_);
      if (!toks.empty()) return toks;
    }
    fail("unexpected end of file");
  }

  std::vector<std::string_view> keyed(const std::string& key, std::size_t args) {
    auto toks = line();
    if (toks[0] != key || toks.size() != args + 1) fail("expected '" + key + "' with " + std::to_string(args) + " value(s)");
    return toks;
  }

  double number(std::string_view tok) {
    auto v = corpusio::detail::parse_double(tok);
    if (!v || !std::isfinite(*v)) fail("malformed number '" + std::string(tok) + "'");
    return *v;
  }

  Index integer(std::string_view tok) {
    auto v = corpusio::detail::parse_int(tok);
    if (!v || *v < 0) fail("malformed count '" + std::string(tok) + "'");
    return static_cast<Index>(*v);
  }

  Matrix matrix(const std::string& name) {
    auto h = line();
    if (h.size() != 4 || h[0] != "matrix" || h[1] != name) fail("expected section 'matrix " + name + "'");
    const Index r = integer(h[2]), c = integer(h[3]);
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i) {
      auto row = line();
      if (static_cast<Index>(row.size()) != c) fail(name + ": expected " + std::to_string(c) + " values");
      for (Index j = 0; j < c; ++j) m(i, j) = number(row[static_cast<std::size_t>(j)]);
    }
    return m;
  }

  Vector vector(const std::string& name) {
    auto h = line();
    if (h.size() != 3 || h[0] != "vector" || h[1] != name) fail("expected section 'vector " + name + "'");
    const Index n = integer(h[2]);
    Vector v(n);
    if (n == 0) return v;
    auto row = line();
    if (static_cast<Index>(row.size()) != n) fail(name + ": expected " + std::to_string(n) + " values");
    for (Index j = 0; j < n; ++j) v(j) = number(row[static_cast<std::size_t>(j)]);
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(path_, lineno_, msg); }

 private:
  std::istream& in_;
  std::string path_;
  std::string buf_;
  std::size_t lineno_ = 0;
};

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ckpt.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << kCheckpointTag << ' ' << kCheckpointVersion << '\n';
  out << "lambda " << corpusio::detail::format_double(ckpt.lambda) << '\n';
  out << "csls_k " << ckpt.csls_k << '\n';
  out << "normalize " << int{ckpt.normalize.unit} << ' ' << int{ckpt.normalize.center} << '\n';
  detail::write_matrix(out, "embed.wx", ckpt.embed.wx);
  detail::write_matrix(out, "embed.wy", ckpt.embed.wy);
  detail::write_matrix(out, "anchor.wx", ckpt.anchor.wx);
  detail::write_matrix(out, "anchor.wy", ckpt.anchor.wy);
  out << "spring " << (ckpt.spring ? 1 : 0) << '\n';
  if (ckpt.spring) {
    for (const auto& [side, net] : {std::pair{"x", &ckpt.spring->x}, std::pair{"y", &ckpt.spring->y}}) {
      const std::string p = std::string("spring.") + side + ".";
      detail::write_matrix(out, p + "w0", net->w0);
      detail::write_vector(out, p + "b0", net->b0);
      detail::write_matrix(out, p + "w1", net->w1);
      detail::write_vector(out, p + "b1", net->b1);
      detail::write_vector(out, p + "gamma", net->gamma);
    }
  }
  out << "end\n";
  if (!out) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  detail::CheckpointReader r(in, path);

  auto head = r.line();
  if (head.size() != 2 || head[0] != kCheckpointTag) throw VersionError(path + ": not a checkpoint file");
  if (head[1] != std::to_string(kCheckpointVersion)) {
    throw VersionError(path + ": checkpoint version '" + std::string(head[1]) + "', this build reads version " +
                       std::to_string(kCheckpointVersion));
  }
  Checkpoint c;
  c.lambda = r.number(r.keyed("lambda", 1)[1]);
  c.csls_k = static_cast<int>(r.integer(r.keyed("csls_k", 1)[1]));
  auto norm = r.keyed("normalize", 2);
  c.normalize.unit = r.integer(norm[1]) != 0;
  c.normalize.center = r.integer(norm[2]) != 0;
  c.embed.wx = r.matrix("embed.wx");
  c.embed.wy = r.matrix("embed.wy");
  c.anchor.wx = r.matrix("anchor.wx");
  c.anchor.wy = r.matrix("anchor.wy");
  if (r.integer(r.keyed("spring", 1)[1]) != 0) {
    spring::SpringParams sp;
    auto read_net = [&](const std::string& side) {
      const std::string p = "spring." + side + ".";
      spring::SpringNet n;
      n.w0 = r.matrix(p + "w0");
      n.b0 = r.vector(p + "b0");
      n.w1 = r.matrix(p + "w1");
      n.b1 = r.vector(p + "b1");
      n.gamma = r.vector(p + "gamma");
      return n;
    };
    sp.x = read_net("x");
    sp.y = read_net("y");
    c.spring = std::move(sp);
  }
  r.keyed("end", 0);
  c.validate();
  return c;
}

}  // namespace blicomb
