#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace blicomb {

// Rows are words throughout, so row-major keeps per-word access contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Malformed input, located by file path and 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& msg)
      : Error("parse", path + ":" + std::to_string(line) + ": " + msg), path_(path), line_(line) {}
  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error("dimension", msg) {}
};

class VersionError : public Error {
 public:
  explicit VersionError(const std::string& msg) : Error("version", msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

/// Raised by iterative procedures that cannot continue (empty induced
/// dictionary, non-finite loss).
class AbortError : public Error {
 public:
  explicit AbortError(const std::string& msg) : Error("abort", msg) {}
};

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Ordered list of unique tokens with its inverse index.
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(const std::vector<std::string>& words) {
    for (const auto& w : words) {
      if (!add(w)) throw ConfigError("duplicate token in vocabulary: " + w);
    }
  }

  /// Appends `word`; returns false (and changes nothing) if already present.
  bool add(const std::string& word) {
    auto [it, inserted] = index_.try_emplace(word, static_cast<Index>(words_.size()));
    if (!inserted) return false;
    words_.push_back(word);
    return true;
  }

  Index size() const noexcept { return static_cast<Index>(words_.size()); }
  bool empty() const noexcept { return words_.empty(); }
  const std::string& word(Index i) const { return words_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& words() const noexcept { return words_; }

  /// Row of `word`, or -1.
  Index find(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? -1 : it->second;
  }
  bool contains(const std::string& word) const { return index_.count(word) != 0; }

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, Index> index_;
};

struct EmbeddingMatrix {
  Vocabulary vocab;
  Matrix data;

  Index dim() const noexcept { return data.cols(); }
};

struct TranslationPair {
  Index src = 0;
  Index tgt = 0;
  auto operator<=>(const TranslationPair&) const = default;
};

/// Ordered translation pairs. Duplicates and multiple targets per source are legal.
class BilingualDictionary {
 public:
  BilingualDictionary() = default;
  explicit BilingualDictionary(std::vector<TranslationPair> pairs) : pairs_(std::move(pairs)) {}

  void add(Index src, Index tgt) { pairs_.push_back({src, tgt}); }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  const TranslationPair& operator[](std::size_t i) const { return pairs_[i]; }
  const std::vector<TranslationPair>& pairs() const noexcept { return pairs_; }
  auto begin() const { return pairs_.begin(); }
  auto end() const { return pairs_.end(); }

  /// Distinct source indices in first-appearance order.
  std::vector<Index> sources() const {
    std::vector<Index> out;
    std::unordered_map<Index, bool> seen;
    for (const auto& p : pairs_) {
      if (seen.try_emplace(p.src, true).second) out.push_back(p.src);
    }
    return out;
  }

  /// source -> all gold targets, in dictionary order.
  std::unordered_map<Index, std::vector<Index>> targets_by_source() const {
    std::unordered_map<Index, std::vector<Index>> out;
    for (const auto& p : pairs_) out[p.src].push_back(p.tgt);
    return out;
  }

  /// Sorted, de-duplicated copy; two dictionaries are the same set iff their
  /// canonical forms compare equal.
  BilingualDictionary canonical() const {
    auto p = pairs_;
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    return BilingualDictionary(std::move(p));
  }

  bool same_set(const BilingualDictionary& other) const {
    return canonical().pairs_ == other.canonical().pairs_;
  }

  void check_ranges(Index src_size, Index tgt_size) const {
    for (const auto& p : pairs_) {
      if (p.src < 0 || p.src >= src_size || p.tgt < 0 || p.tgt >= tgt_size) {
        throw DimensionError("dictionary pair (" + std::to_string(p.src) + ", " +
                             std::to_string(p.tgt) + ") out of vocabulary range");
      }
    }
  }

  bool operator==(const BilingualDictionary&) const = default;

 private:
  std::vector<TranslationPair> pairs_;
};

/// Two orthogonal maps sending both languages into a shared space.
struct MappingPair {
  Matrix wx;
  Matrix wy;

  Index dim() const noexcept { return wx.rows(); }
};

/// Max-abs deviation of WᵀW from the identity.
inline double orthogonality_error(const Matrix& w) {
  Matrix g = w.transpose() * w;
  g -= Matrix::Identity(g.rows(), g.cols());
  return g.cwiseAbs().maxCoeff();
}

/// Copy of `m` with every nonzero row scaled to unit length.
inline Matrix unit_rows(const Matrix& m) {
  Matrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

inline Matrix select_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace blicomb
