#pragma once

// Text readers and writers for embeddings, dictionaries and token-context dumps.

#include "blicomb/types.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace blicomb::corpusio {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool is_blank(std::string_view line) { return split_ws(line).empty(); }

inline std::optional<double> parse_double(std::string_view tok) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view tok) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads the word2vec text format: a "count dim" header, then one
/// "word v1 ... v_dim" row per line. Words are lowercased; a repeated word
/// keeps its first row.
inline EmbeddingMatrix load_embeddings(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::size_t lineno = 0;

  Index count = 0, dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    auto toks = detail::split_ws(line);
    if (toks.size() != 2) throw ParseError(path, lineno, "expected header \"count dim\"");
    auto c = detail::parse_int(toks[0]);
    auto d = detail::parse_int(toks[1]);
    if (!c || !d || *c < 0 || *d <= 0) throw ParseError(path, lineno, "malformed header");
    count = *c;
    dim = *d;
    break;
  }
  if (lineno == 0 || dim == 0) throw ParseError(path, lineno, "missing header");

  EmbeddingMatrix out;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(count * dim));
  Index rows_read = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    auto toks = detail::split_ws(line);
    if (static_cast<Index>(toks.size()) != dim + 1) {
      throw ParseError(path, lineno,
                       "expected " + std::to_string(dim) + " components, got " +
                           std::to_string(static_cast<Index>(toks.size()) - 1));
    }
    ++rows_read;
    if (rows_read > count) throw ParseError(path, lineno, "more rows than declared in header");
    std::vector<double> row(static_cast<std::size_t>(dim));
    for (Index k = 0; k < dim; ++k) {
      auto v = detail::parse_double(toks[static_cast<std::size_t>(k + 1)]);
      if (!v) throw ParseError(path, lineno, "malformed number '" + std::string(toks[k + 1]) + "'");
      if (!std::isfinite(*v)) throw ParseError(path, lineno, "non-finite value");
      row[static_cast<std::size_t>(k)] = *v;
    }
    if (out.vocab.add(to_lower(toks[0]))) values.insert(values.end(), row.begin(), row.end());
  }
  if (rows_read != count) {
    throw ParseError(path, lineno,
                     "header declares " + std::to_string(count) + " rows, found " +
                         std::to_string(rows_read));
  }
  out.data = Eigen::Map<Matrix>(values.data(), out.vocab.size(), dim);
  return out;
}

/// Writes `data` in the same "count dim" text format `load_embeddings` reads.
inline void save_embeddings(const std::string& path, const Vocabulary& vocab, const Matrix& data) {
  if (vocab.size() != data.rows()) throw DimensionError("vocabulary/matrix row count mismatch");
  auto out = detail::open_out(path);
  out << data.rows() << ' ' << data.cols() << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    out << vocab.word(i);
    for (Index k = 0; k < data.cols(); ++k) out << ' ' << detail::format_double(data(i, k));
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

struct DictionaryLoad {
  BilingualDictionary dict;
  std::size_t retained = 0;
  std::size_t dropped = 0;
};

/// Reads one "source target" pair per line. Pairs with an out-of-vocabulary
/// side are dropped and counted; duplicates are kept.
inline DictionaryLoad load_dictionary(const std::string& path, const Vocabulary& src,
                                      const Vocabulary& tgt) {
  auto in = detail::open_in(path);
  DictionaryLoad out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 2) throw ParseError(path, lineno, "expected two tokens");
    const Index s = src.find(to_lower(toks[0]));
    const Index t = tgt.find(to_lower(toks[1]));
    if (s < 0 || t < 0) {
      ++out.dropped;
      continue;
    }
    out.dict.add(s, t);
    ++out.retained;
  }
  if (out.dict.empty()) {
    throw ConfigError(path + ": no dictionary pair survives vocabulary filtering (" +
                      std::to_string(out.dropped) + " dropped)");
  }
  return out;
}

inline void save_dictionary(const std::string& path, const BilingualDictionary& dict,
                            const Vocabulary& src, const Vocabulary& tgt) {
  auto out = detail::open_out(path);
  for (const auto& p : dict) out << src.word(p.src) << ' ' << tgt.word(p.tgt) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

struct ContextRecord {
  std::string word;
  std::int64_t context_id = 0;
  int bpe_index = 0;
  int bpe_count = 1;
  std::vector<double> vector;
};

/// Streams records from a token-context dump: a header line holding the
/// vector dimension, then "word context_id bpe_index bpe_count v1 ... v_d"
/// per line. Records come back in file order.
class ContextRecordReader {
 public:
  explicit ContextRecordReader(std::string path) : path_(std::move(path)), in_(detail::open_in(path_)) {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      auto toks = detail::split_ws(line);
      if (toks.empty()) continue;
      auto d = toks.size() == 1 ? detail::parse_int(toks[0]) : std::nullopt;
      if (!d || *d <= 0) throw ParseError(path_, lineno_, "expected header holding the vector dimension");
      dim_ = static_cast<int>(*d);
      return;
    }
    throw ParseError(path_, lineno_, "missing header");
  }

  int dim() const noexcept { return dim_; }
  const std::string& path() const noexcept { return path_; }

  std::optional<ContextRecord> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      auto toks = detail::split_ws(line);
      if (toks.empty()) continue;
      if (static_cast<int>(toks.size()) != 4 + dim_) {
        throw ParseError(path_, lineno_,
                         "expected " + std::to_string(dim_) + " vector components, got " +
                             std::to_string(static_cast<int>(toks.size()) - 4));
      }
      ContextRecord r;
      r.word = to_lower(toks[0]);
      auto cid = detail::parse_int(toks[1]);
      auto bi = detail::parse_int(toks[2]);
      auto bc = detail::parse_int(toks[3]);
      if (!cid || *cid < 0) throw ParseError(path_, lineno_, "bad context id");
      if (!bc || *bc < 1) throw ParseError(path_, lineno_, "bad bpe count");
      if (!bi || *bi < 0 || *bi >= *bc) throw ParseError(path_, lineno_, "bpe index out of [0, bpe_count)");
      r.context_id = *cid;
      r.bpe_index = static_cast<int>(*bi);
      r.bpe_count = static_cast<int>(*bc);
      r.vector.resize(static_cast<std::size_t>(dim_));
      for (int k = 0; k < dim_; ++k) {
        auto v = detail::parse_double(toks[static_cast<std::size_t>(4 + k)]);
        if (!v || !std::isfinite(*v)) throw ParseError(path_, lineno_, "malformed or non-finite value");
        r.vector[static_cast<std::size_t>(k)] = *v;
      }
      return r;
    }
    return std::nullopt;
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t lineno_ = 0;
  int dim_ = 0;
};

inline void write_context_header(std::ostream& out, int dim) { out << dim << '\n'; }

inline void write_context_record(std::ostream& out, const ContextRecord& r) {
  out << r.word << ' ' << r.context_id << ' ' << r.bpe_index << ' ' << r.bpe_count;
  for (double v : r.vector) out << ' ' << detail::format_double(v);
  out << '\n';
}

}  // namespace blicomb::corpusio
