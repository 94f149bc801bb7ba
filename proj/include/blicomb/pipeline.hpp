#pragma once

// End-to-end orchestration: normalization, mapping, spring training, lambda
// tuning and the baseline / contextual / unified / interpolated comparison.

#include "blicomb/align.hpp"
#include "blicomb/anchors.hpp"
#include "blicomb/checkpoint.hpp"
#include "blicomb/contrastive.hpp"
#include "blicomb/retrieve.hpp"
#include "blicomb/types.hpp"

#include <cstdint>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace blicomb::pipeline {

/// Raw inputs for both languages; anchor rows are aligned to the vocabularies.
struct Inputs {
  EmbeddingMatrix src;
  EmbeddingMatrix tgt;
  anchors::AnchorMatrix src_anchor;
  anchors::AnchorMatrix tgt_anchor;

  void validate() const {
    if (src.dim() != tgt.dim()) throw DimensionError("source and target embeddings differ in dimension");
    if (src_anchor.dim() != tgt_anchor.dim()) throw DimensionError("source and target anchors differ in dimension");
    if (src_anchor.data.rows() != src.vocab.size() || tgt_anchor.data.rows() != tgt.vocab.size()) {
      throw DimensionError("anchor rows do not align with the vocabularies");
    }
  }
};

/// Normalized copies of every space; what mapping and training consume.
struct Prepared {
  Matrix ex;
  Matrix ey;
  anchors::AnchorMatrix ax;
  anchors::AnchorMatrix ay;
};

inline Prepared prepare(const Inputs& in, const align::NormalizeConfig& norm) {
  in.validate();
  Prepared p;
  p.ex = align::normalize(in.src.data, norm);
  p.ey = align::normalize(in.tgt.data, norm);
  p.ax = in.src_anchor;
  p.ay = in.tgt_anchor;
  p.ax.data = align::normalize(in.src_anchor.data, norm);
  p.ay.data = align::normalize(in.tgt_anchor.data, norm);
  return p;
}

/// Dictionary pairs whose both sides have anchors.
inline BilingualDictionary covered_pairs(const BilingualDictionary& dict, const anchors::AnchorMatrix& ax,
                                         const anchors::AnchorMatrix& ay) {
  BilingualDictionary out;
  for (const auto& p : dict) {
    if (ax.covered(p.src) && ay.covered(p.tgt)) out.add(p.src, p.tgt);
  }
  if (out.empty()) throw ConfigError("no dictionary pair has anchors on both sides");
  return out;
}

/// The spaces a checkpoint induces: unified (mapped embeddings plus spring
/// offsets, or the mapped embeddings alone when there is no spring) and the
/// mapped anchors.
struct Spaces {
  Matrix ex_mapped;
  Matrix ey_mapped;
  retrieve::ScoringSpaces scoring;
};

inline Spaces spaces_for(const Prepared& p, const Checkpoint& c) {
  c.check_compatible(p.ex.cols(), p.ax.dim());
  Spaces s;
  s.ex_mapped = p.ex * c.embed.wx;
  s.ey_mapped = p.ey * c.embed.wy;
  s.scoring.src_anchor = p.ax.data * c.anchor.wx;
  s.scoring.tgt_anchor = p.ay.data * c.anchor.wy;
  if (c.spring) {
    auto u = contrastive::unified_space(s.ex_mapped, s.ey_mapped, p.ax, p.ay, *c.spring);
    s.scoring.src_unified = std::move(u.ux);
    s.scoring.tgt_unified = std::move(u.uy);
  } else {
    s.scoring.src_unified = s.ex_mapped;
    s.scoring.tgt_unified = s.ey_mapped;
  }
  return s;
}

/// Checkpoint with the target side as source.
inline Checkpoint reversed(const Checkpoint& c) {
  Checkpoint r = c;
  std::swap(r.embed.wx, r.embed.wy);
  std::swap(r.anchor.wx, r.anchor.wy);
  if (r.spring) std::swap(r.spring->x, r.spring->y);
  return r;
}

inline Prepared reversed(const Prepared& p) { return {p.ey, p.ex, p.ay, p.ax}; }

inline BilingualDictionary reversed(const BilingualDictionary& d) {
  BilingualDictionary out;
  for (const auto& p : d) out.add(p.tgt, p.src);
  return out;
}

inline retrieve::SimilarityConfig csls_config(int k, double lambda = 0.0) {
  return {lambda, k, retrieve::SimilarityMode::csls, retrieve::CslsComposition::per_term};
}

/// P@1 for the four systems on `gold`, all with CSLS retrieval.
struct Comparison {
  double baseline = 0.0;
  double contextual = 0.0;
  double unified = 0.0;
  double interpolated = 0.0;
};

inline Comparison compare(const Spaces& s, const BilingualDictionary& gold, int k, double lambda) {
  Comparison c;
  const auto cfg = csls_config(k);
  c.baseline = retrieve::evaluate_p1(retrieve::InterpolatedScorer({s.ex_mapped, s.ey_mapped, {}, {}}, cfg), gold);
  c.contextual = retrieve::evaluate_p1(
      retrieve::InterpolatedScorer({s.scoring.src_anchor, s.scoring.tgt_anchor, {}, {}}, cfg), gold);
  retrieve::InterpolatedScorer full(s.scoring, cfg);
  c.unified = retrieve::evaluate_p1(full, gold);
  full.set_lambda(lambda);
  c.interpolated = retrieve::evaluate_p1(full, gold);
  return c;
}

struct SupervisedOptions {
  align::NormalizeConfig normalize{};
  contrastive::TrainConfig train{};
  int csls_k = retrieve::kDefaultCslsK;
  std::vector<double> lambda_grid = retrieve::default_lambda_grid();
};

struct Outcome {
  Checkpoint checkpoint;
  std::optional<Checkpoint> backward;  ///< unsupervised runs only
  retrieve::LambdaSearch lambda_search;
  Comparison test;
  std::vector<contrastive::EpochStats> curve;
  BilingualDictionary induced;  ///< unsupervised runs only
  int self_learn_iterations = 0;
  int unsupervised_rounds = 0;
  bool unsupervised_converged = false;
};

/// Procrustes on `train` for both spaces, spring training selected on `val`,
/// lambda tuned on `val`, evaluation on `test`.
inline Outcome run_supervised(const Prepared& p, const BilingualDictionary& train, const BilingualDictionary& val,
                              const BilingualDictionary& test, const SupervisedOptions& opt) {
  Outcome o;
  Checkpoint& c = o.checkpoint;
  c.normalize = opt.normalize;
  c.csls_k = opt.csls_k;
  c.embed = align::procrustes(p.ex, p.ey, train);
  c.anchor = align::procrustes(p.ax.data, p.ay.data, covered_pairs(train, p.ax, p.ay));
  const Spaces mapped = spaces_for(p, c);
  auto tr = contrastive::train_supervised(mapped.ex_mapped, mapped.ey_mapped, p.ax, p.ay, train, val, opt.train);
  c.spring = tr.params;
  o.curve = std::move(tr.curve);
  const Spaces s = spaces_for(p, c);
  o.lambda_search = retrieve::tune_lambda_supervised(val, s.scoring, csls_config(opt.csls_k), opt.lambda_grid);
  c.lambda = o.lambda_search.lambda;
  o.test = compare(s, test, opt.csls_k, c.lambda);
  return o;
}

struct UnsupervisedOptions {
  align::NormalizeConfig normalize{};
  align::SelfLearnConfig self_learn{};
  contrastive::TrainConfig train = contrastive::TrainConfig::unsupervised_defaults();
  int csls_k = retrieve::kDefaultCslsK;
  std::vector<double> lambda_grid = retrieve::default_lambda_grid();
};

/// Self-learned mapping from an identical-string seed, then one spring model
/// per direction trained by iterated re-induction, lambda chosen by
/// round-trip accuracy over `val_sources`. `test` is used for evaluation only.
inline Outcome run_unsupervised(const Prepared& p, const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                const std::vector<Index>& val_sources, const BilingualDictionary& test,
                                const UnsupervisedOptions& opt) {
  Outcome o;
  Checkpoint& c = o.checkpoint;
  c.normalize = opt.normalize;
  c.csls_k = opt.csls_k;
  const auto seed = align::seed_dictionary_identical_strings(src_vocab, tgt_vocab);
  auto sl = align::self_learn(p.ex, p.ey, seed, opt.self_learn);
  o.self_learn_iterations = sl.iterations;
  c.embed = sl.mapping;
  c.anchor = align::procrustes(p.ax.data, p.ay.data, covered_pairs(sl.dict, p.ax, p.ay));

  // The induced dictionary may hold several targets per source (both
  // directions are unioned); training uses it as is.
  const Spaces mapped = spaces_for(p, c);
  auto fw = contrastive::train_unsupervised(mapped.ex_mapped, mapped.ey_mapped, p.ax, p.ay, sl.dict, opt.train);
  c.spring = fw.params;
  o.curve = std::move(fw.curve);
  o.induced = fw.dict;
  o.unsupervised_rounds = fw.rounds;
  o.unsupervised_converged = fw.converged;

  Checkpoint back = reversed(c);
  back.spring.reset();
  const Prepared rp = reversed(p);
  const Spaces rmapped = spaces_for(rp, back);
  auto bw = contrastive::train_unsupervised(rmapped.ex_mapped, rmapped.ey_mapped, rp.ax, rp.ay, reversed(sl.dict),
                                            opt.train);
  back.spring = bw.params;

  const Spaces s = spaces_for(p, c);
  const Spaces rs = spaces_for(rp, back);
  o.lambda_search =
      retrieve::tune_lambda_unsupervised(val_sources, s.scoring, rs.scoring, csls_config(opt.csls_k), opt.lambda_grid);
  c.lambda = o.lambda_search.lambda;
  back.lambda = c.lambda;
  o.backward = std::move(back);
  o.test = compare(s, test, opt.csls_k, c.lambda);
  return o;
}

/// 64-bit FNV-1a, used to fingerprint effective configurations in reports.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Plain-text report: a reproducibility stanza, free-form lines, then a
/// machine-readable block of metric=value lines.
class Report {
 public:
  Report(std::map<std::string, std::string> seeds, const std::string& effective_config)
      : seeds_(std::move(seeds)), config_hash_(hex64(fnv1a(effective_config))) {}

  void line(const std::string& text) { lines_.push_back(text); }
  void metric(const std::string& key, double value) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << value;
    metrics_.emplace_back(key, os.str());
  }
  void metric(const std::string& key, const std::string& value) { metrics_.emplace_back(key, value); }

  void write(std::ostream& out) const {
    out << "# blicomb report\n";
    out << "# seeds:";
    for (const auto& [k, v] : seeds_) out << ' ' << k << '=' << v;
    out << "\n# config_hash=" << config_hash_ << '\n';
    for (const auto& l : lines_) out << l << '\n';
    out << "[metrics]\n";
    for (const auto& [k, v] : metrics_) out << k << '=' << v << '\n';
  }

  std::string str() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

 private:
  std::map<std::string, std::string> seeds_;
  std::string config_hash_;
  std::vector<std::string> lines_;
  std::vector<std::pair<std::string, std::string>> metrics_;
};

/// The baseline / contextual / unified / interpolated block shared by the
/// pipeline and eval reports.
inline void add_comparison(Report& r, const Comparison& c, double lambda) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "P@1 baseline (static, CSLS)   " << c.baseline << '\n';
  os << "P@1 contextual (anchors)      " << c.contextual << '\n';
  os << "P@1 unified                   " << c.unified << '\n';
  os << "P@1 interpolated (lambda=" << std::setprecision(2) << lambda << ") " << c.interpolated;
  r.line(os.str());
  r.metric("baseline_p1", c.baseline);
  r.metric("contextual_p1", c.contextual);
  r.metric("unified_p1", c.unified);
  r.metric("interpolated_p1", c.interpolated);
  r.metric("lambda", lambda);
}

}  // namespace blicomb::pipeline
