// blicomb command-line front end.
//
//   blicomb synth | build-anchors | map | train | tune | induce | eval | pipeline
//
// Every subcommand accepts --config FILE with key=value lines (keys are option
// names without the dashes); flags given on the command line take precedence. Failures print a single line
//   error: kind=<kind> message="<text>"
// on stderr and exit with status 1.

#include "blicomb/blicomb.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace blicomb;

namespace {

struct InputPaths {
  std::string src_emb, tgt_emb, src_anchors, tgt_anchors;
  bool no_center = false;
};

void add_inputs(CLI::App* app, InputPaths& in, bool anchors_required = true) {
  app->add_option("--src-emb", in.src_emb, "Source embeddings (word2vec text)")->required();
  app->add_option("--tgt-emb", in.tgt_emb, "Target embeddings (word2vec text)")->required();
  auto* a = app->add_option("--src-anchors", in.src_anchors, "Source anchor matrix (same text format)");
  auto* b = app->add_option("--tgt-anchors", in.tgt_anchors, "Target anchor matrix (same text format)");
  if (anchors_required) {
    a->required();
    b->required();
  }
  app->add_flag("--no-center", in.no_center, "Skip mean centering during normalization");
}

align::NormalizeConfig normalize_config(const InputPaths& in) { return {true, !in.no_center}; }

pipeline::Inputs load_inputs(const InputPaths& p) {
  pipeline::Inputs in;
  in.src = corpusio::load_embeddings(p.src_emb);
  in.tgt = corpusio::load_embeddings(p.tgt_emb);
  in.src_anchor = anchors::align_to_vocabulary(corpusio::load_embeddings(p.src_anchors), in.src.vocab);
  in.tgt_anchor = anchors::align_to_vocabulary(corpusio::load_embeddings(p.tgt_anchors), in.tgt.vocab);
  return in;
}

BilingualDictionary load_dict(const std::string& path, const pipeline::Inputs& in, const char* what) {
  auto d = corpusio::load_dictionary(path, in.src.vocab, in.tgt.vocab);
  std::cerr << what << " dictionary " << path << ": " << d.retained << " pairs retained, " << d.dropped
            << " dropped (out of vocabulary)\n";
  return std::move(d.dict);
}

struct TrainOptions {
  contrastive::TrainConfig cfg;
  std::string optimizer = "adam";
  std::string log_path;
};

void add_train_options(CLI::App* app, TrainOptions& t, int default_negatives) {
  t.cfg.negatives = default_negatives;
  app->add_option("--negatives", t.cfg.negatives, "Negatives per source word (J)")->capture_default_str();
  app->add_option("--epochs", t.cfg.epochs, "Supervised training epochs")->capture_default_str();
  app->add_option("--batch-size", t.cfg.batch_size)->capture_default_str();
  app->add_option("--lr", t.cfg.learning_rate, "Learning rate")->capture_default_str();
  app->add_option("--optimizer", t.optimizer)->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
  app->add_option("--seed", t.cfg.seed, "Training seed (init and shuffling)")->capture_default_str();
  app->add_option("--gamma-init", t.cfg.gamma_init)->capture_default_str();
  app->add_option("--max-rounds", t.cfg.max_rounds, "Unsupervised re-induction rounds")->capture_default_str();
  app->add_option("--round-epochs", t.cfg.round_epochs, "Epochs per unsupervised round")->capture_default_str();
  app->add_option("--train-log", t.log_path, "Write the per-epoch training log here");
}

contrastive::TrainConfig finish_train_config(TrainOptions& t, int csls_k, std::ofstream& log) {
  auto cfg = t.cfg;
  cfg.optimizer = t.optimizer == "sgd" ? contrastive::Optimizer::sgd : contrastive::Optimizer::adam;
  cfg.induction = pipeline::csls_config(csls_k);
  if (!t.log_path.empty()) {
    log.open(t.log_path);
    if (!log) throw IoError("cannot write " + t.log_path);
    cfg.log = &log;
  }
  return cfg;
}

// Every option's resolved value, minus the config file path itself, so the
// same settings hash the same whether they came from flags or a file.
// Options that shape results; where outputs land is left out so reruns into
// different directories fingerprint the same.
std::string effective_config(const CLI::App* app) {
  static const std::vector<std::string> skipped{"config=", "out=", "out-dir=", "report=", "train-log=", "dict-out="};
  std::istringstream all(app->config_to_str(true, false));
  std::string out, line;
  while (std::getline(all, line)) {
    const bool skip = std::any_of(skipped.begin(), skipped.end(), [&](const auto& k) { return line.rfind(k, 0) == 0; });
    if (!skip) out += line + '\n';
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

void write_lexicon(const std::string& path, const std::vector<Index>& queries,
                   const std::vector<std::vector<retrieve::Candidate>>& ranked, const Vocabulary& src,
                   const Vocabulary& tgt) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (const auto& c : ranked[i]) {
      out << src.word(queries[i]) << ' ' << tgt.word(c.target) << ' ' << corpusio::detail::format_double(c.score)
          << '\n';
    }
  }
}

std::string fixed(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Appends `--key value` for each line of the --config file whose option was
// not given on the command line. `key=true` becomes a bare flag and
// `key=false` is dropped.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::vector<std::string> extra;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(path, lineno, "expected key=value");
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    const std::string flag = "--" + key;
    if (key.empty() || key == "config") throw ParseError(path, lineno, "invalid key");
    if (given(flag) || value == "false") continue;
    extra.push_back(flag);
    if (value != "true") extra.push_back(value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilingual lexicon induction combining static embeddings with contextual anchors"};
  app.require_subcommand(1);

  // synth -------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic bilingual world");
  synthgen::SynthWorldConfig wc;
  std::string synth_out;
  std::size_t n_train = 500, n_val = 500, n_test = 500;
  std::uint64_t split_seed = 11;
  int dump_contexts = 0, dump_bpes = 2;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--n-words", wc.n_words)->capture_default_str();
  synth->add_option("--dim", wc.dim)->capture_default_str();
  synth->add_option("--anchor-dim", wc.anchor_dim)->capture_default_str();
  synth->add_option("--seed", wc.seed)->capture_default_str();
  synth->add_option("--noise", wc.noise, "Per-component sigma on target embeddings")->capture_default_str();
  synth->add_option("--deform-fraction", wc.deform_fraction)->capture_default_str();
  synth->add_option("--deform-centers", wc.deform_centers)->capture_default_str();
  synth->add_option("--deform-spread", wc.deform_spread)->capture_default_str();
  synth->add_option("--deform-shift", wc.deform_shift)->capture_default_str();
  synth->add_option("--anchor-fidelity", wc.anchor_fidelity)->capture_default_str();
  synth->add_option("--anchor-noise", wc.anchor_noise)->capture_default_str();
  synth->add_option("--train-size", n_train)->capture_default_str();
  synth->add_option("--val-size", n_val)->capture_default_str();
  synth->add_option("--test-size", n_test)->capture_default_str();
  synth->add_option("--split-seed", split_seed)->capture_default_str();
  synth->add_option("--dump-contexts", dump_contexts, "Also write token-context dumps with this many contexts per word")
      ->capture_default_str();
  synth->add_option("--dump-bpes", dump_bpes, "Subword pieces per context in the dumps")->capture_default_str();

  // build-anchors -----------------------------------------------------------
  auto* build = app.add_subcommand("build-anchors", "Average token-context dumps into an anchor matrix");
  std::string dump_path, vocab_path, anchor_out;
  int max_contexts = anchors::kDefaultMaxContexts;
  std::uint64_t anchor_seed = 0;
  build->add_option("--dump", dump_path, "Token-context dump")->required();
  build->add_option("--vocab", vocab_path, "Embedding file whose vocabulary orders the rows")->required();
  build->add_option("--out", anchor_out, "Output anchor matrix")->required();
  build->add_option("--max-contexts", max_contexts)->capture_default_str();
  build->add_option("--seed", anchor_seed, "Context sampling seed")->capture_default_str();

  // map ---------------------------------------------------------------------
  auto* map = app.add_subcommand("map", "Fit orthogonal mappings for embeddings and anchors");
  InputPaths map_in;
  std::string map_train, map_out, map_dict_out;
  bool map_unsup = false;
  int csls_k = retrieve::kDefaultCslsK;
  align::SelfLearnConfig slc;
  add_inputs(map, map_in);
  map->add_option("--train-dict", map_train, "Seed dictionary (supervised)");
  map->add_flag("--unsupervised", map_unsup, "Self-learn from identical-string pairs");
  map->add_option("--out", map_out, "Output checkpoint")->required();
  map->add_option("--dict-out", map_dict_out, "Write the self-learned dictionary here (unsupervised)");
  map->add_option("--csls-k", csls_k)->capture_default_str();
  map->add_option("--self-learn-iters", slc.max_iters)->capture_default_str();
  map->add_option("--vocab-cutoff", slc.vocab_cutoff, "Rows per side used for re-induction")->capture_default_str();

  // train -------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train the spring networks");
  InputPaths train_in;
  std::string train_ckpt, train_out, train_dict, val_dict, init_dict, train_dict_out;
  bool train_unsup = false;
  TrainOptions topt;
  add_inputs(train, train_in);
  train->add_option("--checkpoint", train_ckpt, "Checkpoint from `map`")->required();
  train->add_option("--out", train_out, "Output checkpoint")->required();
  train->add_option("--train-dict", train_dict);
  train->add_option("--val-dict", val_dict, "Validation dictionary for model selection");
  train->add_flag("--unsupervised", train_unsup);
  train->add_option("--init-dict", init_dict, "Initial dictionary for unsupervised training");
  train->add_option("--dict-out", train_dict_out, "Write the final unsupervised dictionary here");
  add_train_options(train, topt, 10);

  // tune --------------------------------------------------------------------
  auto* tune = app.add_subcommand("tune", "Tune the interpolation weight lambda");
  InputPaths tune_in;
  std::string tune_ckpt, tune_out, tune_val, tune_back;
  bool tune_unsup = false;
  std::vector<double> grid = retrieve::default_lambda_grid();
  add_inputs(tune, tune_in);
  tune->add_option("--checkpoint", tune_ckpt)->required();
  tune->add_option("--out", tune_out, "Output checkpoint")->required();
  tune->add_option("--val-dict", tune_val, "Validation pairs (unsupervised mode uses their source words only)")
      ->required();
  tune->add_flag("--unsupervised", tune_unsup, "Round-trip tuning; needs --backward-checkpoint");
  tune->add_option("--backward-checkpoint", tune_back, "Target-to-source model for round-trip tuning");
  tune->add_option("--lambda-grid", grid, "Candidate lambdas")->delimiter(',');

  // induce ------------------------------------------------------------------
  auto* induce = app.add_subcommand("induce", "Write an induced lexicon");
  InputPaths ind_in;
  std::string ind_ckpt, ind_out, ind_queries, ind_mode = "csls";
  Index top_n = 1;
  double ind_lambda = -1.0;
  add_inputs(induce, ind_in);
  induce->add_option("--checkpoint", ind_ckpt)->required();
  induce->add_option("--out", ind_out, "Lexicon: 'src tgt score' lines")->required();
  induce->add_option("--queries", ind_queries, "Dictionary whose source words are queried (default: all)");
  induce->add_option("--top-n", top_n)->capture_default_str();
  induce->add_option("--mode", ind_mode)->check(CLI::IsMember({"cosine", "csls"}))->capture_default_str();
  induce->add_option("--lambda", ind_lambda, "Override the checkpoint's lambda");

  // eval --------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Report P@1 for baseline, contextual, unified and interpolated retrieval");
  InputPaths eval_in;
  std::string eval_ckpt, eval_gold, eval_lexicon, eval_report;
  add_inputs(eval, eval_in);
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--gold", eval_gold, "Test dictionary")->required();
  eval->add_option("--lexicon", eval_lexicon, "Also score this induced lexicon");
  eval->add_option("--report", eval_report, "Write the report here as well as to stdout");

  // pipeline ----------------------------------------------------------------
  auto* pipe = app.add_subcommand("pipeline", "map -> train -> tune -> induce -> eval");
  InputPaths pipe_in;
  std::string pipe_train, pipe_val, pipe_test, pipe_out;
  bool pipe_unsup = false;
  TrainOptions popt;
  int pipe_k = retrieve::kDefaultCslsK;
  align::SelfLearnConfig pipe_sl;
  add_inputs(pipe, pipe_in);
  pipe->add_option("--train-dict", pipe_train, "Training dictionary (supervised)");
  pipe->add_option("--val-dict", pipe_val)->required();
  pipe->add_option("--test-dict", pipe_test)->required();
  pipe->add_option("--out-dir", pipe_out)->required();
  pipe->add_flag("--unsupervised", pipe_unsup);
  pipe->add_option("--csls-k", pipe_k)->capture_default_str();
  pipe->add_option("--self-learn-iters", pipe_sl.max_iters)->capture_default_str();
  add_train_options(pipe, popt, 10);

  std::string config_path;
  for (auto* sub : app.get_subcommands({})) {
    sub->add_option("--config", config_path, "key=value file of option defaults; command-line flags take precedence");
  }

  std::vector<std::string> args;
  try {
    args = expand_config({argv, argv + argc});
  } catch (const Error& e) {
    std::cerr << "error: kind=" << e.kind() << " message=\"" << e.what() << "\"\n";
    return 1;
  }
  std::vector<char*> cargs;
  for (auto& a : args) cargs.push_back(a.data());

  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) {
      const auto world = synthgen::generate(wc);
      const auto split = synthgen::split_gold(world.gold, n_train, n_val, n_test, split_seed);
      synthgen::write_world(world, split, synth_out);
      if (dump_contexts > 0) {
        synthgen::write_context_dump((fs::path(synth_out) / "src.ctx").string(), world.src.vocab, world.src_anchor,
                                     dump_contexts, dump_bpes, wc.seed + 1);
        synthgen::write_context_dump((fs::path(synth_out) / "tgt.ctx").string(), world.tgt.vocab, world.tgt_anchor,
                                     dump_contexts, dump_bpes, wc.seed + 2);
      }
      std::size_t deformed = 0;
      for (bool b : world.deformed) deformed += b ? 1 : 0;
      std::cout << "words=" << wc.n_words << " dim=" << wc.dim << " anchor_dim=" << wc.anchor_dim
                << " deformed=" << deformed << " train=" << n_train << " val=" << n_val << " test=" << n_test
                << " out=" << synth_out << '\n';
    } else if (build->parsed()) {
      const auto vocab = corpusio::load_embeddings(vocab_path).vocab;
      corpusio::ContextRecordReader reader(dump_path);
      anchors::BuildStats stats;
      const auto a = anchors::build_anchors(reader, vocab, max_contexts, anchor_seed, &stats);
      corpusio::save_embeddings(anchor_out, vocab, a.data);
      std::cout << "records_used=" << stats.records_used << " out_of_vocab=" << stats.records_out_of_vocab
                << " incomplete_groups=" << stats.incomplete_groups << '\n';
      for (const auto& [cov, count] : anchors::anchor_coverage_report(a)) {
        std::cout << "coverage " << cov << ": " << count << " words" << (cov == 0 ? " (no anchor)" : "") << '\n';
      }
    } else if (map->parsed()) {
      if (map_unsup == !map_train.empty()) throw ConfigError("map needs exactly one of --train-dict or --unsupervised");
      const auto in = load_inputs(map_in);
      const auto p = pipeline::prepare(in, normalize_config(map_in));
      Checkpoint c;
      c.normalize = normalize_config(map_in);
      c.csls_k = csls_k;
      BilingualDictionary dict;
      if (map_unsup) {
        slc.csls_k = csls_k;
        auto sl = align::self_learn(p.ex, p.ey, align::seed_dictionary_identical_strings(in.src.vocab, in.tgt.vocab),
                                    slc);
        c.embed = sl.mapping;
        dict = sl.dict;
        std::cout << "self_learn iterations=" << sl.iterations << " converged=" << sl.converged
                  << " pairs=" << dict.size() << '\n';
        const std::string out = map_dict_out.empty() ? map_out + ".dict" : map_dict_out;
        corpusio::save_dictionary(out, dict, in.src.vocab, in.tgt.vocab);
      } else {
        dict = load_dict(map_train, in, "train");
        c.embed = align::procrustes(p.ex, p.ey, dict);
      }
      c.anchor = align::procrustes(p.ax.data, p.ay.data, pipeline::covered_pairs(dict, p.ax, p.ay));
      c.lambda = retrieve::kDefaultSupervisedLambda;
      save_checkpoint(c, map_out);
      std::cout << "orthogonality_error embed=" << std::max(orthogonality_error(c.embed.wx), orthogonality_error(c.embed.wy))
                << " anchor=" << std::max(orthogonality_error(c.anchor.wx), orthogonality_error(c.anchor.wy)) << '\n';
    } else if (train->parsed()) {
      const auto in = load_inputs(train_in);
      Checkpoint c = load_checkpoint(train_ckpt);
      const auto p = pipeline::prepare(in, c.normalize);
      c.spring.reset();
      const auto mapped = pipeline::spaces_for(p, c);
      std::ofstream log;
      const auto cfg = finish_train_config(topt, c.csls_k, log);
      if (train_unsup) {
        if (init_dict.empty()) throw ConfigError("unsupervised training needs --init-dict");
        const auto init = load_dict(init_dict, in, "init");
        auto r = contrastive::train_unsupervised(mapped.ex_mapped, mapped.ey_mapped, p.ax, p.ay, init, cfg);
        c.spring = r.params;
        std::cout << "rounds=" << r.rounds << " converged=" << r.converged << " pairs=" << r.dict.size() << '\n';
        if (!train_dict_out.empty()) corpusio::save_dictionary(train_dict_out, r.dict, in.src.vocab, in.tgt.vocab);
      } else {
        if (train_dict.empty()) throw ConfigError("supervised training needs --train-dict");
        const auto tr = load_dict(train_dict, in, "train");
        const auto val = val_dict.empty() ? BilingualDictionary{} : load_dict(val_dict, in, "val");
        auto r = contrastive::train_supervised(mapped.ex_mapped, mapped.ey_mapped, p.ax, p.ay, tr, val, cfg);
        c.spring = r.params;
        std::cout << "best_epoch=" << r.best_epoch
                  << " best_val_p1=" << (val.size() ? fixed(r.best_val_p1) : std::string("n/a")) << '\n';
      }
      save_checkpoint(c, train_out);
    } else if (tune->parsed()) {
      const auto in = load_inputs(tune_in);
      Checkpoint c = load_checkpoint(tune_ckpt);
      const auto p = pipeline::prepare(in, c.normalize);
      const auto val = load_dict(tune_val, in, "val");
      const auto s = pipeline::spaces_for(p, c);
      retrieve::LambdaSearch ls;
      if (tune_unsup) {
        if (tune_back.empty()) throw ConfigError("unsupervised tuning needs --backward-checkpoint");
        const Checkpoint back = load_checkpoint(tune_back);
        const auto rs = pipeline::spaces_for(pipeline::reversed(p), back);
        ls = retrieve::tune_lambda_unsupervised(val.sources(), s.scoring, rs.scoring, pipeline::csls_config(c.csls_k),
                                                grid);
      } else {
        ls = retrieve::tune_lambda_supervised(val, s.scoring, pipeline::csls_config(c.csls_k), grid);
      }
      for (std::size_t i = 0; i < ls.grid.size(); ++i) {
        std::cout << "lambda=" << fixed(ls.grid[i], 2) << " accuracy=" << fixed(ls.accuracy[i]) << '\n';
      }
      std::cout << "selected lambda=" << fixed(ls.lambda, 2) << '\n';
      c.lambda = ls.lambda;
      save_checkpoint(c, tune_out);
    } else if (induce->parsed()) {
      const auto in = load_inputs(ind_in);
      const Checkpoint c = load_checkpoint(ind_ckpt);
      const auto p = pipeline::prepare(in, c.normalize);
      const auto s = pipeline::spaces_for(p, c);
      std::vector<Index> queries;
      if (ind_queries.empty()) {
        for (Index i = 0; i < in.src.vocab.size(); ++i) queries.push_back(i);
      } else {
        queries = load_dict(ind_queries, in, "query").sources();
      }
      retrieve::SimilarityConfig cfg = pipeline::csls_config(c.csls_k, ind_lambda >= 0.0 ? ind_lambda : c.lambda);
      if (ind_mode == "cosine") cfg.mode = retrieve::SimilarityMode::cosine;
      const auto ranked = retrieve::induce(retrieve::InterpolatedScorer(s.scoring, cfg), queries, top_n);
      write_lexicon(ind_out, queries, ranked, in.src.vocab, in.tgt.vocab);
      std::cout << "queries=" << queries.size() << " lexicon=" << ind_out << '\n';
    } else if (eval->parsed()) {
      const auto in = load_inputs(eval_in);
      const Checkpoint c = load_checkpoint(eval_ckpt);
      const auto p = pipeline::prepare(in, c.normalize);
      const auto gold = load_dict(eval_gold, in, "gold");
      const auto s = pipeline::spaces_for(p, c);
      pipeline::Report report({}, effective_config(eval));
      report.line("mode: eval");
      report.line("gold queries: " + std::to_string(gold.sources().size()));
      pipeline::add_comparison(report, pipeline::compare(s, gold, c.csls_k, c.lambda), c.lambda);
      if (!eval_lexicon.empty()) {
        std::ifstream lx(eval_lexicon);
        if (!lx) throw IoError("cannot open " + eval_lexicon);
        const auto gold_targets = gold.targets_by_source();
        std::vector<retrieve::Prediction> preds;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(lx, line)) {
          ++lineno;
          auto toks = corpusio::detail::split_ws(line);
          if (toks.empty()) continue;
          if (toks.size() < 2) throw ParseError(eval_lexicon, lineno, "expected 'src tgt [score]'");
          const Index sidx = in.src.vocab.find(to_lower(toks[0]));
          const Index tidx = in.tgt.vocab.find(to_lower(toks[1]));
          if (sidx < 0 || tidx < 0) throw ParseError(eval_lexicon, lineno, "word not in vocabulary");
          if (gold_targets.count(sidx)) preds.push_back({sidx, tidx});
        }
        report.metric("lexicon_p1", retrieve::precision_at_1(preds, gold));
      }
      const std::string text = report.str();
      std::cout << text;
      if (!eval_report.empty()) write_text(eval_report, text);
    } else if (pipe->parsed()) {
      if (pipe_unsup == !pipe_train.empty()) {
        throw ConfigError("pipeline needs exactly one of --train-dict or --unsupervised");
      }
      const auto in = load_inputs(pipe_in);
      const auto norm = normalize_config(pipe_in);
      const auto p = pipeline::prepare(in, norm);
      const auto val = load_dict(pipe_val, in, "val");
      const auto test = load_dict(pipe_test, in, "test");
      fs::create_directories(pipe_out);
      const auto out = [&](const char* name) { return (fs::path(pipe_out) / name).string(); };
      if (pipe_unsup && popt.cfg.negatives == 10 && pipe->count("--negatives") == 0) popt.cfg.negatives = 1;
      if (popt.log_path.empty()) popt.log_path = out("train.log");
      std::ofstream log;
      const auto cfg = finish_train_config(popt, pipe_k, log);

      pipeline::Outcome o;
      if (pipe_unsup) {
        pipeline::UnsupervisedOptions opt;
        opt.normalize = norm;
        opt.train = cfg;
        opt.csls_k = pipe_k;
        opt.self_learn = pipe_sl;
        opt.self_learn.csls_k = pipe_k;
        o = pipeline::run_unsupervised(p, in.src.vocab, in.tgt.vocab, val.sources(), test, opt);
        save_checkpoint(*o.backward, out("backward.ckpt"));
        corpusio::save_dictionary(out("induced.dict"), o.induced, in.src.vocab, in.tgt.vocab);
      } else {
        const auto tr = load_dict(pipe_train, in, "train");
        pipeline::SupervisedOptions opt;
        opt.normalize = norm;
        opt.train = cfg;
        opt.csls_k = pipe_k;
        o = pipeline::run_supervised(p, tr, val, test, opt);
      }
      save_checkpoint(o.checkpoint, out("checkpoint.ckpt"));

      const auto s = pipeline::spaces_for(p, o.checkpoint);
      const auto queries = test.sources();
      const auto ranked = retrieve::induce(
          retrieve::InterpolatedScorer(s.scoring, pipeline::csls_config(pipe_k, o.checkpoint.lambda)), queries, 1);
      write_lexicon(out("lexicon.txt"), queries, ranked, in.src.vocab, in.tgt.vocab);

      pipeline::Report report({{"train_seed", std::to_string(popt.cfg.seed)}}, effective_config(pipe));
      report.line(std::string("mode: ") + (pipe_unsup ? "unsupervised" : "supervised"));
      report.line("vocabulary: src=" + std::to_string(in.src.vocab.size()) + " tgt=" + std::to_string(in.tgt.vocab.size()) +
                  " dim=" + std::to_string(in.src.dim()) + " anchor_dim=" + std::to_string(in.src_anchor.dim()));
      report.line("test queries: " + std::to_string(queries.size()));
      if (pipe_unsup) {
        report.line("self-learning iterations: " + std::to_string(o.self_learn_iterations));
        report.line("unsupervised rounds: " + std::to_string(o.unsupervised_rounds) +
                    (o.unsupervised_converged ? " (converged)" : " (cap reached)"));
      }
      std::ostringstream grid_line;
      grid_line << "lambda search:";
      for (std::size_t i = 0; i < o.lambda_search.grid.size(); ++i) {
        grid_line << ' ' << fixed(o.lambda_search.grid[i], 2) << ':' << fixed(o.lambda_search.accuracy[i], 2);
      }
      report.line(grid_line.str());
      pipeline::add_comparison(report, o.test, o.checkpoint.lambda);
      report.metric("mode", pipe_unsup ? "unsupervised" : "supervised");
      const std::string text = report.str();
      write_text(out("report.txt"), text);
      std::cout << text;
    }
  } catch (const Error& e) {
    std::cerr << "error: kind=" << e.kind() << " message=\"" << e.what() << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: kind=internal message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
