// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every threshold and world parameter is pinned below.

#include "blicomb/blicomb.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#ifndef BLICOMB_CLI_PATH
#error "BLICOMB_CLI_PATH must name the command-line binary"
#endif

using namespace blicomb;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances ----
constexpr double kOrthoTol = 1e-6;
constexpr double kIsometricMinP1 = 95.0;
constexpr double kUnifiedGain = 2.0;
constexpr double kNoiseAnchorMaxLoss = 1.0;
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr int kFdDraws = 5;
constexpr double kOracleTol = 1e-12;
constexpr double kSelfLearnSlack = 2.0;
constexpr double kInitDictAccuracy = 0.8;

// ---- pinned worlds ----
constexpr Index kWords = 2000, kDim = 50, kAnchorDim = 64;
constexpr std::size_t kTrain = 500, kVal = 500, kTest = 500;
constexpr std::uint64_t kSplitSeed = 11;
constexpr double kDeformedNoise = 0.1, kDeformFraction = 0.3;
constexpr double kInformativeFidelity = 0.45;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(double v, int prec = 2) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(2);
  os << std::scientific << v;
  return os.str();
}

synthgen::SynthWorldConfig world(double noise, double deform, double fidelity) {
  synthgen::SynthWorldConfig c;
  c.n_words = kWords;
  c.dim = kDim;
  c.anchor_dim = kAnchorDim;
  c.noise = noise;
  c.deform_fraction = deform;
  c.anchor_fidelity = fidelity;
  return c;
}

struct World {
  synthgen::SynthWorld w;
  synthgen::Split split;
  pipeline::Prepared p;
};

World build(const synthgen::SynthWorldConfig& c) {
  World out;
  out.w = synthgen::generate(c);
  out.split = synthgen::split_gold(out.w.gold, kTrain, kVal, kTest, kSplitSeed);
  out.p = pipeline::prepare({out.w.src, out.w.tgt, out.w.src_anchor, out.w.tgt_anchor}, {});
  return out;
}

pipeline::SupervisedOptions training_options() {
  pipeline::SupervisedOptions o;
  o.train.learning_rate = 0.01;
  o.train.epochs = 40;
  return o;
}

double procrustes_p1(const World& w, const MappingPair& m, const BilingualDictionary& gold) {
  return retrieve::evaluate_p1(retrieve::InterpolatedScorer({w.p.ex * m.wx, w.p.ey * m.wy, {}, {}}, {}), gold);
}

double mapping_error(const MappingPair& m) { return std::max(orthogonality_error(m.wx), orthogonality_error(m.wy)); }

// ---- 1 ----
void orthogonality(const World& iso, const World& deformed) {
  double worst = 0.0;
  for (const World* w : {&iso, &deformed}) {
    worst = std::max(worst, mapping_error(align::procrustes(w->p.ex, w->p.ey, w->split.train)));
    worst = std::max(worst, mapping_error(align::procrustes(w->p.ax.data, w->p.ay.data, w->split.train)));
    const auto seed = align::seed_dictionary_identical_strings(w->w.src.vocab, w->w.tgt.vocab);
    BilingualDictionary small;
    for (std::size_t i = 0; i < 50; ++i) small.add(seed[i].src, seed[i].tgt);
    worst = std::max(worst, mapping_error(align::self_learn(w->p.ex, w->p.ey, small).mapping));
  }
  std::mt19937_64 rng(3);
  for (int t = 0; t < 5; ++t) {
    Matrix x = synthgen::detail::gaussian(4, 30, rng), y = synthgen::detail::gaussian(4, 30, rng);
    BilingualDictionary d;
    for (Index i = 0; i < 4; ++i) d.add(i, i);
    worst = std::max(worst, mapping_error(align::procrustes(x, y, d)));  // rank-deficient
  }
  report(1, "orthogonality", worst < kOrthoTol, "max |W^T W - I| = " + sci(worst) + " (< " + sci(kOrthoTol) + ")");
}

// ---- 2 ----
void isometric_recovery(const World& iso) {
  auto noiseless = build(world(0.0, 0.0, kInformativeFidelity));
  const double ceiling = procrustes_p1(noiseless, align::procrustes(noiseless.p.ex, noiseless.p.ey, noiseless.split.train),
                                       noiseless.split.test);
  const double p1 = procrustes_p1(iso, align::procrustes(iso.p.ex, iso.p.ey, iso.split.train), iso.split.test);
  report(2, "isometric recovery", p1 >= kIsometricMinP1,
         "P@1 " + fmt(p1) + " at sigma=0.01 (>= " + fmt(kIsometricMinP1) + "; sigma=0 oracle " + fmt(ceiling) + ")");
}

// ---- 3, 4 ----
void orderings(const World& deformed) {
  const auto o = pipeline::run_supervised(deformed.p, deformed.split.train, deformed.split.val, deformed.split.test,
                                          training_options());
  report(3, "unified beats baseline", o.test.unified >= o.test.baseline + kUnifiedGain,
         "unified " + fmt(o.test.unified) + " vs baseline " + fmt(o.test.baseline) + " (gain >= " +
             fmt(kUnifiedGain) + ")");

  const bool informative = o.test.interpolated >= o.test.unified;
  auto noise = build(world(kDeformedNoise, kDeformFraction, 0.0));
  const auto n = pipeline::run_supervised(noise.p, noise.split.train, noise.split.val, noise.split.test,
                                          training_options());
  const double grid_min = retrieve::default_lambda_grid().front();
  const bool at_min = n.lambda_search.lambda == grid_min;
  const double loss = n.test.unified - n.test.interpolated;
  report(4, "interpolation at least unified", informative && at_min && loss < kNoiseAnchorMaxLoss,
         "informative: interpolated " + fmt(o.test.interpolated) + " vs unified " + fmt(o.test.unified) +
             " (lambda " + fmt(o.lambda_search.lambda) + "); noise anchors: lambda " + fmt(n.lambda_search.lambda) +
             " (want " + fmt(grid_min) + "), loss " + fmt(loss) + " (< " + fmt(kNoiseAnchorMaxLoss) + ")");
}

// ---- 5 ----
void gradient_check() {
  double worst = 0.0;
  for (int draw = 0; draw < kFdDraws; ++draw) {
    std::mt19937_64 rng(500 + static_cast<std::uint64_t>(draw));
    const Index dp = 7, d = 5, rows = 3;
    spring::SpringNet net;
    net.w0 = synthgen::detail::gaussian(dp, d, rng, 0.5);
    net.b0 = synthgen::detail::gaussian(d, 1, rng, 0.3);
    net.w1 = synthgen::detail::gaussian(d, d, rng, 0.5);
    net.b1 = synthgen::detail::gaussian(d, 1, rng, 0.3);
    net.gamma = synthgen::detail::gaussian(d, 1, rng, 0.5);
    Matrix e = synthgen::detail::gaussian(rows, d, rng), a = synthgen::detail::gaussian(rows, dp, rng);
    Matrix up = synthgen::detail::gaussian(rows, d, rng);
    auto objective = [&](const spring::SpringNet& n) { return (up.array() * spring::unify(e, a, n).array()).sum(); };
    spring::SpringNet g = spring::spring_backward(a, up, net);
    spring::SpringNet probe = net;
    probe.zip(g, [&](auto& param, auto& grad) {
      for (Index k = 0; k < param.size(); ++k) {
        const double orig = param.data()[k];
        param.data()[k] = orig + kFdStep;
        const double fp = objective(probe);
        param.data()[k] = orig - kFdStep;
        const double fm = objective(probe);
        param.data()[k] = orig;
        const double fd = (fp - fm) / (2 * kFdStep), an = grad.data()[k];
        const double scale = std::max(std::abs(fd), std::abs(an));
        if (scale > 1e-8) worst = std::max(worst, std::abs(fd - an) / scale);
      }
    });
  }
  report(5, "spring gradients", worst < kFdRelTol,
         std::to_string(kFdDraws) + " draws, max relative error " + sci(worst) + " (< " + sci(kFdRelTol) + ")");
}

// ---- 6 ----
void csls_oracle() {
  double worst = 0.0;
  const int k = 3;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    Matrix sim = retrieve::cosine_matrix(synthgen::detail::gaussian(20, 6, rng), synthgen::detail::gaussian(20, 6, rng));
    Matrix got = retrieve::csls_scores(sim, k);
    for (Index i = 0; i < 20; ++i) {
      for (Index j = 0; j < 20; ++j) {
        std::vector<double> row, col;
        for (Index t = 0; t < 20; ++t) {
          row.push_back(sim(i, t));
          col.push_back(sim(t, j));
        }
        std::sort(row.rbegin(), row.rend());
        std::sort(col.rbegin(), col.rend());
        double rt = 0, rs = 0;
        for (int t = 0; t < k; ++t) {
          rt += row[static_cast<std::size_t>(t)];
          rs += col[static_cast<std::size_t>(t)];
        }
        worst = std::max(worst, std::abs(got(i, j) - (2 * sim(i, j) - rt / k - rs / k)));
      }
    }
  }
  report(6, "CSLS oracle", worst <= kOracleTol, "10 seeds of 20x20, max deviation " + sci(worst));
}

// ---- 7 ----
void loss_oracle() {
  double worst = 0.0;
  auto cosine = [](const Matrix& a, Index i, const Matrix& b, Index j) {
    double dot = 0, na = 0, nb = 0;
    for (Index t = 0; t < a.cols(); ++t) {
      dot += a(i, t) * b(j, t);
      na += a(i, t) * a(i, t);
      nb += b(j, t) * b(j, t);
    }
    return dot / std::sqrt(na * nb);
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    Matrix ux = synthgen::detail::gaussian(6, 4, rng), uy = synthgen::detail::gaussian(8, 4, rng);
    BilingualDictionary d({{0, 1}, {3, 4}, {5, 0}});
    std::vector<std::vector<Index>> neg{{0, 2}, {5, 7}, {6, 3}};
    const int J = 2;
    double ref = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      double pos = 0, negs = 0;
      for (int c = 0; c < J; ++c) pos += cosine(ux, d[i].src, uy, d[i].tgt);
      for (Index n : neg[i]) negs += cosine(ux, d[i].src, uy, n);
      ref -= pos - negs;
    }
    worst = std::max(worst, std::abs(contrastive::contrastive_loss(ux, uy, d, neg, J) - ref));
  }
  std::mt19937_64 rng(77);
  Matrix ux = synthgen::detail::gaussian(1, 5, rng), uy = synthgen::detail::gaussian(4, 5, rng);
  const double closed = -(3 * cosine(ux, 0, uy, 0) - (cosine(ux, 0, uy, 1) + cosine(ux, 0, uy, 2) + cosine(ux, 0, uy, 3)));
  const double j3 = std::abs(contrastive::contrastive_loss(ux, uy, BilingualDictionary({{0, 0}}), {{1, 2, 3}}, 3) - closed);
  report(7, "contrastive loss oracle", worst <= kOracleTol && j3 <= kOracleTol,
         "loop oracle max deviation " + sci(worst) + ", I=1 J=3 closed form deviation " + sci(j3));
}

// ---- 8 ----
double dict_accuracy(const BilingualDictionary& d) {
  std::size_t ok = 0;
  for (const auto& p : d) ok += p.src == p.tgt ? 1 : 0;  // synthetic gold pairs word i with word i
  return 100.0 * static_cast<double>(ok) / static_cast<double>(d.size());
}

void unsupervised_contract(const World& iso, const World& deformed) {
  // 80%-correct initial dictionary over the train and validation sources.
  std::mt19937_64 rng(8);
  BilingualDictionary init;
  std::vector<Index> sources;
  for (const auto* part : {&deformed.split.train, &deformed.split.val})
    for (const auto& p : *part) sources.push_back(p.src);
  std::shuffle(sources.begin(), sources.end(), rng);
  const auto n_right = static_cast<std::size_t>(kInitDictAccuracy * static_cast<double>(sources.size()));
  std::uniform_int_distribution<Index> any(0, kWords - 1);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    Index t = sources[i];
    if (i >= n_right) {
      do t = any(rng);
      while (t == sources[i]);
    }
    init.add(sources[i], t);
  }
  const double init_acc = dict_accuracy(init);

  Checkpoint c;
  c.embed = align::procrustes(deformed.p.ex, deformed.p.ey, init);
  c.anchor = align::procrustes(deformed.p.ax.data, deformed.p.ay.data, init);
  const auto mapped = pipeline::spaces_for(deformed.p, c);
  auto cfg = contrastive::TrainConfig::unsupervised_defaults();
  cfg.learning_rate = 0.01;
  const auto r = contrastive::train_unsupervised(mapped.ex_mapped, mapped.ey_mapped, deformed.p.ax, deformed.p.ay,
                                                 init, cfg);
  const double final_acc = dict_accuracy(r.dict);
  const bool loop_ok = r.rounds >= 1 && r.rounds <= cfg.max_rounds && final_acc >= init_acc;

  const auto seed = align::seed_dictionary_identical_strings(iso.w.src.vocab, iso.w.tgt.vocab);
  const auto sl = align::self_learn(iso.p.ex, iso.p.ey, seed);
  const double sl_p1 = procrustes_p1(iso, sl.mapping, iso.split.test);
  const double sup_p1 = procrustes_p1(iso, align::procrustes(iso.p.ex, iso.p.ey, iso.split.train), iso.split.test);
  report(8, "unsupervised loop", loop_ok && sl_p1 >= sup_p1 - kSelfLearnSlack,
         "dictionary accuracy " + fmt(init_acc) + " -> " + fmt(final_acc) + " after " + std::to_string(r.rounds) +
             " round(s)" + (r.converged ? " (fixed point)" : " (cap)") + "; self-learning P@1 " + fmt(sl_p1) +
             " vs supervised " + fmt(sup_p1));
}

// ---- 9 ----
void lambda_grids(const World& deformed) {
  const auto grid = retrieve::default_lambda_grid();
  bool exact = grid.size() == 26;
  for (std::size_t i = 0; exact && i < grid.size(); ++i) exact = std::abs(grid[i] - (0.05 + 0.01 * i)) < 1e-12;

  Checkpoint c;
  c.embed = align::procrustes(deformed.p.ex, deformed.p.ey, deformed.split.train);
  c.anchor = align::procrustes(deformed.p.ax.data, deformed.p.ay.data, deformed.split.train);
  const auto fwd = pipeline::spaces_for(deformed.p, c);
  const auto bwd = pipeline::spaces_for(pipeline::reversed(deformed.p), pipeline::reversed(c));
  const auto val_sources = deformed.split.val.sources();
  const retrieve::SimilarityConfig cfg{};
  const auto a = retrieve::tune_lambda_unsupervised(val_sources, fwd.scoring, bwd.scoring, cfg);
  const auto b = retrieve::tune_lambda_unsupervised(val_sources, fwd.scoring, bwd.scoring, cfg);
  const bool member = std::find(grid.begin(), grid.end(), a.lambda) != grid.end();
  const bool deterministic = a.lambda == b.lambda && a.accuracy == b.accuracy;

  // Perfect world: both sides identical, every lambda round-trips everything.
  const Matrix e = deformed.p.ex.topRows(300), an = deformed.p.ax.data.topRows(300);
  retrieve::ScoringSpaces perfect{e, e, an, an};
  std::vector<Index> q(300);
  std::iota(q.begin(), q.end(), Index{0});
  const auto pw = retrieve::tune_lambda_unsupervised(q, perfect, perfect.reversed(), cfg);
  report(9, "lambda grids", exact && member && deterministic && pw.lambda == grid.front(),
         std::string("grid ") + (exact ? "exact" : "WRONG") + " (" + std::to_string(grid.size()) +
             " points); round-trip pick " + fmt(a.lambda) + (member ? " on grid" : " OFF grid") +
             (deterministic ? ", deterministic" : ", NOT deterministic") + "; perfect world " + fmt(pw.lambda));
}

// ---- 10 ----
int run(const std::string& cmd) { return std::system(cmd.c_str()); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism(const fs::path& work) {
  const std::string cli = BLICOMB_CLI_PATH;
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path w = work / "world";
  const std::string q = "\"";
  bool ok = run(q + cli + q + " synth --out " + q + w.string() + q +
                " --n-words 600 --dim 20 --anchor-dim 24 --noise 0.1 --deform-fraction 0.3"
                " --train-size 200 --val-size 150 --test-size 150 > " + q + (work / "synth.log").string() + q + " 2>&1") == 0;
  auto pipe = [&](const std::string& out, const std::string& src_anchors) {
    return q + cli + q + " pipeline --src-emb " + q + (w / "src.emb").string() + q + " --tgt-emb " + q +
           (w / "tgt.emb").string() + q + " --src-anchors " + q + src_anchors + q + " --tgt-anchors " + q +
           (w / "tgt.anchors").string() + q + " --train-dict " + q + (w / "train.dict").string() + q +
           " --val-dict " + q + (w / "val.dict").string() + q + " --test-dict " + q + (w / "test.dict").string() +
           q + " --epochs 5 --lr 0.01 --seed 5 --out-dir " + q + out + q;
  };
  const std::string anchors = (w / "src.anchors").string();
  const fs::path a = work / "run_a", b = work / "run_b";
  ok = ok && run(pipe(a.string(), anchors) + " > " + q + (work / "a.log").string() + q + " 2>&1") == 0;
  ok = ok && run(pipe(b.string(), anchors) + " > " + q + (work / "b.log").string() + q + " 2>&1") == 0;
  const bool report_same = ok && slurp(a / "report.txt") == slurp(b / "report.txt") && !slurp(a / "report.txt").empty();
  const bool ckpt_same =
      ok && slurp(a / "checkpoint.ckpt") == slurp(b / "checkpoint.ckpt") && !slurp(a / "checkpoint.ckpt").empty();

  const std::string missing = (work / "no_such.anchors").string();
  const fs::path err = work / "missing.err";
  const int rc = run(pipe((work / "run_c").string(), missing) + " > /dev/null 2> " + q + err.string() + q);
  const std::string msg = slurp(err);
  const bool fails_loudly = rc != 0 && msg.find("kind=io") != std::string::npos && msg.find(missing) != std::string::npos;

  report(10, "determinism", ok && report_same && ckpt_same && fails_loudly,
         std::string(ok ? "" : "a CLI run failed; ") + "reports " + (report_same ? "identical" : "DIFFER") +
             ", checkpoints " + (ckpt_same ? "identical" : "DIFFER") + "; missing anchor file " +
             (fails_loudly ? "rejected with its path" : "NOT rejected cleanly"));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "blicomb_acceptance";
  try {
    const World iso = build(world(0.01, 0.0, kInformativeFidelity));
    const World deformed = build(world(kDeformedNoise, kDeformFraction, kInformativeFidelity));
    orthogonality(iso, deformed);
    isometric_recovery(iso);
    orderings(deformed);
    gradient_check();
    csls_oracle();
    loss_oracle();
    unsupervised_contract(iso, deformed);
    lambda_grids(deformed);
    determinism(work);
  } catch (const std::exception& e) {
    std::cout << "[FAIL] acceptance aborted: " << e.what() << std::endl;
    return 2;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion/criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
