#pragma once

// Word-level average anchors built from token-level contextual vectors.
//
// Within one context a word's subword vectors are averaged first; the
// per-context means are then averaged over (at most `max_contexts`) sampled
// contexts. Contexts are sorted by id before sampling so the result does not
// depend on the line order of the dump.

#include "blicomb/corpusio.hpp"
#include "blicomb/types.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace blicomb::anchors {

inline constexpr int kDefaultMaxContexts = 10;

struct AnchorMatrix {
  Matrix data;
  /// Number of contexts averaged into each row; 0 marks a word never seen.
  std::vector<int> coverage;

  Index dim() const noexcept { return data.cols(); }
  bool covered(Index row) const { return coverage[static_cast<std::size_t>(row)] > 0; }
};

struct BuildStats {
  std::size_t records_used = 0;
  std::size_t records_out_of_vocab = 0;
  std::size_t incomplete_groups = 0;
};

/// Collects records into (word, context) groups without keeping raw vectors.
class AnchorAccumulator {
 public:
  AnchorAccumulator(const Vocabulary& vocab, int dim) : vocab_(vocab), dim_(dim) {}

  void add(const corpusio::ContextRecord& r) {
    if (static_cast<int>(r.vector.size()) != dim_) {
      throw DimensionError("context vector of length " + std::to_string(r.vector.size()) +
                           ", expected " + std::to_string(dim_));
    }
    const Index row = vocab_.find(r.word);
    if (row < 0) {
      ++stats_.records_out_of_vocab;
      return;
    }
    auto& g = groups_[row][r.context_id];
    if (g.sum.size() == 0) {
      g.sum = Vector::Zero(dim_);
      g.bpe_count = r.bpe_count;
    }
    if (r.bpe_count != g.bpe_count || r.bpe_index < 0 || r.bpe_index >= r.bpe_count ||
        !g.mark(r.bpe_index)) {
      g.broken = true;
    }
    g.sum += Eigen::Map<const Vector>(r.vector.data(), dim_);
    ++stats_.records_used;
  }

  AnchorMatrix finish(int max_contexts, std::uint64_t seed) {
    if (max_contexts < 1) throw ConfigError("max_contexts must be >= 1");
    AnchorMatrix out;
    out.data = Matrix::Zero(vocab_.size(), dim_);
    out.coverage.assign(static_cast<std::size_t>(vocab_.size()), 0);
    std::mt19937_64 rng(seed);

    // Visit rows in vocabulary order so the RNG stream is independent of input order.
    for (Index row = 0; row < vocab_.size(); ++row) {
      auto it = groups_.find(row);
      if (it == groups_.end()) continue;
      std::vector<const Group*> complete;  // std::map keeps context ids sorted
      for (const auto& [cid, g] : it->second) {
        if (g.broken || static_cast<int>(g.seen_count) != g.bpe_count) {
          ++stats_.incomplete_groups;
          continue;
        }
        complete.push_back(&g);
      }
      if (static_cast<int>(complete.size()) > max_contexts) {
        // Partial Fisher-Yates: the first max_contexts slots are a uniform subset.
        for (int i = 0; i < max_contexts; ++i) {
          std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), complete.size() - 1);
          std::swap(complete[static_cast<std::size_t>(i)], complete[pick(rng)]);
        }
        complete.resize(static_cast<std::size_t>(max_contexts));
      }
      if (complete.empty()) continue;
      Vector acc = Vector::Zero(dim_);
      for (const Group* g : complete) acc += g->sum / static_cast<double>(g->bpe_count);
      out.data.row(row) = (acc / static_cast<double>(complete.size())).transpose();
      out.coverage[static_cast<std::size_t>(row)] = static_cast<int>(complete.size());
    }
    return out;
  }

  const BuildStats& stats() const noexcept { return stats_; }

 private:
  struct Group {
    Vector sum;
    int bpe_count = 0;
    std::vector<bool> seen;
    std::size_t seen_count = 0;
    bool broken = false;

    bool mark(int idx) {
      auto i = static_cast<std::size_t>(idx);
      if (seen.size() <= i) seen.resize(i + 1, false);
      if (seen[i]) return false;
      seen[i] = true;
      ++seen_count;
      return true;
    }
  };

  const Vocabulary& vocab_;
  int dim_;
  std::unordered_map<Index, std::map<std::int64_t, Group>> groups_;
  BuildStats stats_;
};

inline AnchorMatrix build_anchors(corpusio::ContextRecordReader& reader, const Vocabulary& vocab,
                                  int max_contexts = kDefaultMaxContexts, std::uint64_t seed = 0,
                                  BuildStats* stats = nullptr) {
  AnchorAccumulator acc(vocab, reader.dim());
  while (auto r = reader.next()) acc.add(*r);
  auto out = acc.finish(max_contexts, seed);
  if (stats) *stats = acc.stats();
  return out;
}

inline AnchorMatrix build_anchors(std::span<const corpusio::ContextRecord> records, const Vocabulary& vocab,
                                  int dim, int max_contexts = kDefaultMaxContexts, std::uint64_t seed = 0,
                                  BuildStats* stats = nullptr) {
  AnchorAccumulator acc(vocab, dim);
  for (const auto& r : records) acc.add(r);
  auto out = acc.finish(max_contexts, seed);
  if (stats) *stats = acc.stats();
  return out;
}

/// coverage value -> number of words with that coverage.
inline std::map<int, Index> anchor_coverage_report(const AnchorMatrix& a) {
  std::map<int, Index> out;
  for (int c : a.coverage) ++out[c];
  return out;
}

/// Reorders an anchor file's rows onto `vocab`; words absent from the file
/// get a zero row with coverage 0. Nonzero rows read from disk report coverage 1.
inline AnchorMatrix align_to_vocabulary(const EmbeddingMatrix& file, const Vocabulary& vocab) {
  AnchorMatrix out;
  out.data = Matrix::Zero(vocab.size(), file.dim());
  out.coverage.assign(static_cast<std::size_t>(vocab.size()), 0);
  for (Index i = 0; i < vocab.size(); ++i) {
    const Index r = file.vocab.find(vocab.word(i));
    if (r < 0) continue;
    out.data.row(i) = file.data.row(r);
    out.coverage[static_cast<std::size_t>(i)] = file.data.row(r).squaredNorm() > 0.0 ? 1 : 0;
  }
  return out;
}

}  // namespace blicomb::anchors
