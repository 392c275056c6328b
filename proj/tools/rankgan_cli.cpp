// rankgan: command-line entry points for oracle generation, training,
// sampling and evaluation. Data goes to stdout, diagnostics to stderr; the
// exit code is 0 only when the command completed.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rankgan/adversarial.hpp"
#include "rankgan/checkpoint.hpp"
#include "rankgan/config.hpp"
#include "rankgan/corpus.hpp"
#include "rankgan/error.hpp"
#include "rankgan/metrics.hpp"
#include "rankgan/oracle.hpp"
#include "rankgan/parallel.hpp"
#include "rankgan/rng.hpp"
#include "rankgan/run.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace rankgan;

namespace {

struct Common {
  std::uint64_t seed = 1;
  int threads = 0;
  fs::path out_dir;
};

void apply_threads(int threads) {
#ifdef _OPENMP
  set_thread_count(threads > 0 ? threads : omp_get_num_procs());
#else
  (void)threads;
#endif
}

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---- make-oracle -------------------------------------------------------------

struct MakeOracleArgs {
  std::size_t vocab = 500;
  std::size_t embed = 32;
  std::size_t hidden = 32;
  std::size_t count = 10000;
  std::size_t len = 20;
  double init_std = kOracleInitStd;
};

void make_oracle_cmd(const Common& common, const MakeOracleArgs& a) {
  if (common.out_dir.empty()) throw UsageError("make-oracle needs --out-dir");
  if (a.vocab < 1 || a.embed < 1 || a.hidden < 1) throw UsageError("oracle dimensions must be >= 1");
  const Oracle oracle = make_oracle(common.seed, {a.vocab, a.embed, a.hidden}, a.init_std);
  const Corpus corpus =
      generate_synthetic(oracle, a.count, a.len, derive_seed(common.seed, Stream::kSynthetic));
  fs::create_directories(common.out_dir);
  oracle.model().to_checkpoint().save(common.out_dir / "oracle.ckpt");
  save_corpus(common.out_dir / "corpus.txt", corpus);
  corpus.vocab->save(common.out_dir / "vocab.txt");

  // A starting config wired to these artifacts, with the adversarial settings
  // used for oracle experiments; every other key keeps its default.
  std::ofstream cfg(common.out_dir / "train.cfg");
  cfg << "# generated by make-oracle\n"
      << "corpus = corpus.txt\n"
      << "vocab = vocab.txt\n"
      << "oracle = oracle.ckpt\n"
      << "fixed_len = " << a.len << "\n"
      << "embed_dim = " << a.embed << "\n"
      << "hidden_dim = " << a.hidden << "\n"
      << "seed = " << common.seed << "\n"
      << "lr_generator = 2\n"
      << "lr_ranker = 1\n"
      << "critic_pretrain_steps = 300\n"
      << "reward_baseline = true\n"
      << "gamma = 16\n"
      << "ref_size = 4\n"
      << "comparison_size = 4\n";
  if (!cfg) throw IngestionError("cannot write " + (common.out_dir / "train.cfg").string());
  std::cout << "artifact,checksum\n"
            << "oracle.ckpt," << hex64(file_checksum(common.out_dir / "oracle.ckpt")) << "\n"
            << "corpus.txt," << hex64(file_checksum(common.out_dir / "corpus.txt")) << "\n"
            << "vocab.txt," << hex64(file_checksum(common.out_dir / "vocab.txt")) << "\n";
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  fs::path config;
  std::string mode;
  bool resume = false;
  std::size_t stop_after = 0;
  std::vector<std::string> overrides;
  bool quiet = false;
  bool seed_given = false;
};

void train_cmd(const Common& common, const TrainArgs& a) {
  if (a.config.empty()) throw UsageError("train needs --config");
  if (common.out_dir.empty()) throw UsageError("train needs --out-dir");
  TrainingConfig cfg = load_config(a.config);
  for (const std::string& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1), fs::current_path());
  }
  if (!a.mode.empty()) cfg.mode = parse_mode(a.mode);
  if (a.seed_given) cfg.master_seed = common.seed;
  cfg.validate();

  RunOptions opts;
  opts.out_dir = common.out_dir;
  opts.resume = a.resume;
  opts.stop_after = a.stop_after;
  opts.verbose = !a.quiet;
  const RunLog log = run_training(cfg, opts);
  std::cout << log.to_csv();
}

// ---- sample ------------------------------------------------------------------

struct SampleArgs {
  fs::path checkpoint;
  fs::path vocab;
  std::size_t count = 10;
  std::size_t len = 20;
};

std::shared_ptr<const Vocab> vocab_for(const fs::path& explicit_path, const fs::path& checkpoint,
                                       std::size_t model_vocab) {
  fs::path path = explicit_path;
  if (path.empty() && fs::exists(checkpoint.parent_path() / "vocab.txt"))
    path = checkpoint.parent_path() / "vocab.txt";
  auto vocab = path.empty() ? std::make_shared<const Vocab>(Vocab::identity(model_vocab))
                            : std::make_shared<const Vocab>(Vocab::load(path));
  if (vocab->size() != model_vocab) {
    throw UsageError("vocabulary has " + std::to_string(vocab->size()) +
                     " entries but the checkpoint expects " + std::to_string(model_vocab));
  }
  return vocab;
}

void sample_cmd(const Common& common, const SampleArgs& a) {
  if (a.checkpoint.empty()) throw UsageError("sample needs --checkpoint");
  const GeneratorModel gen =
      GeneratorModel::from_checkpoint(Checkpoint::load(a.checkpoint, "generator"));
  const auto vocab = vocab_for(a.vocab, a.checkpoint, gen.dims().vocab);
  for (std::size_t i = 0; i < a.count; ++i) {
    Rng rng = make_rng(common.seed, Stream::kSample, {i});
    std::cout << decode(*vocab, sample(gen, a.len, rng)) << "\n";
  }
}

// ---- eval-nll ----------------------------------------------------------------

struct EvalNllArgs {
  fs::path checkpoint;
  fs::path oracle;
  std::size_t samples = 2000;
  std::size_t len = 20;
  fs::path runlog;
  fs::path curve_out;
};

void eval_nll_cmd(const Common& common, const EvalNllArgs& a) {
  if (a.checkpoint.empty() || a.oracle.empty()) {
    throw UsageError("eval-nll needs --checkpoint and --oracle");
  }
  const GeneratorModel gen =
      GeneratorModel::from_checkpoint(Checkpoint::load(a.checkpoint, "generator"));
  const Oracle oracle(GeneratorModel::from_checkpoint(Checkpoint::load(a.oracle, "generator")));
  const NllEstimate e =
      oracle_nll(oracle, gen, a.samples, a.len, derive_seed(common.seed, Stream::kEval));
  std::cout << "metric,value\n"
            << "oracle_nll," << real(e.mean) << "\n"
            << "std_error," << real(e.std_error) << "\n"
            << "oracle_nll_per_token," << real(e.per_token) << "\n"
            << "samples," << e.samples << "\n";

  if (!a.runlog.empty()) {
    std::ifstream in(a.runlog, std::ios::binary);
    if (!in) throw IngestionError("cannot open run log " + a.runlog.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const RunLog log = RunLog::from_csv(text);
    const fs::path out_path = a.curve_out.empty() ? a.runlog.parent_path() / "curve.csv" : a.curve_out;
    std::ofstream out(out_path);
    out << "epoch,phase,oracle_nll\n";
    for (const EpochRecord& r : log.records)
      out << r.epoch << "," << r.phase << "," << real(r.oracle_nll) << "\n";
    if (!out) throw IngestionError("cannot write curve " + out_path.string());
    std::cerr << "learning curve written to " << out_path.string() << "\n";
  }
}

// ---- eval-bleu ---------------------------------------------------------------

struct EvalBleuArgs {
  fs::path candidates;
  fs::path references;
  fs::path vocab;
  int max_n = 4;
  std::size_t len = 20;
  bool order_only = false;
};

void eval_bleu_cmd(const EvalBleuArgs& a) {
  if (a.candidates.empty() || a.references.empty()) {
    throw UsageError("eval-bleu needs --candidates and --references");
  }
  // Both files share one vocabulary so unseen candidate tokens map to UNK.
  auto vocab = a.vocab.empty()
                   ? std::make_shared<const Vocab>(Vocab::build(read_lines(a.references), 1))
                   : std::make_shared<const Vocab>(Vocab::load(a.vocab));
  const Corpus refs = load_corpus(a.references, vocab, a.len);
  const Corpus cands = load_corpus(a.candidates, vocab, a.len);
  std::cout << "order,score\n";
  for (int n = 1; n <= a.max_n; ++n) {
    BleuSpec spec;
    spec.max_n = n;
    spec.cumulative = !a.order_only;
    spec.validate();
    std::cout << n << "," << real(corpus_bleu(cands, refs, spec)) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RankGAN: adversarial ranking for language generation"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub, bool* seed_given = nullptr) {
    auto* opt = sub->add_option("--seed", common.seed, "Master seed");
    if (seed_given) opt->each([seed_given](const std::string&) { *seed_given = true; });
    sub->add_option("--threads", common.threads, "Worker threads (default: all cores)");
    sub->add_option("--out-dir", common.out_dir, "Output directory");
  };

  MakeOracleArgs mo;
  auto* make = app.add_subcommand("make-oracle", "Create an oracle LSTM and a synthetic corpus");
  add_common(make);
  make->add_option("--vocab-size", mo.vocab, "Vocabulary size");
  make->add_option("--embed", mo.embed, "Oracle embedding size");
  make->add_option("--hidden", mo.hidden, "Oracle hidden size");
  make->add_option("--count", mo.count, "Number of sequences");
  make->add_option("--len", mo.len, "Sequence length");
  make->add_option("--init-std", mo.init_std, "Stddev of the oracle's normal initialisation");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a generator");
  add_common(train, &tr.seed_given);
  train->add_option("--config", tr.config, "Config file (key = value)");
  train->add_option("--mode", tr.mode, "rankgan | binary | pg_bleu | mle_only");
  train->add_flag("--resume", tr.resume, "Continue the run in --out-dir");
  train->add_option("--stop-after", tr.stop_after, "Stop after this many epochs (0 = all)");
  train->add_option("--set", tr.overrides, "Override a config key (key=value)");
  train->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");

  SampleArgs sa;
  auto* samp = app.add_subcommand("sample", "Print sentences sampled from a generator");
  add_common(samp);
  samp->add_option("--checkpoint", sa.checkpoint, "Generator checkpoint");
  samp->add_option("--vocab", sa.vocab, "Vocabulary (default: vocab.txt next to the checkpoint)");
  samp->add_option("--count", sa.count, "Number of sentences");
  samp->add_option("--len", sa.len, "Sequence length");

  EvalNllArgs en;
  auto* nll = app.add_subcommand("eval-nll", "Oracle NLL of a generator's samples");
  add_common(nll);
  nll->add_option("--checkpoint", en.checkpoint, "Generator checkpoint");
  nll->add_option("--oracle", en.oracle, "Oracle checkpoint");
  nll->add_option("--samples", en.samples, "Number of samples");
  nll->add_option("--len", en.len, "Sequence length");
  nll->add_option("--runlog", en.runlog, "Run log to turn into a learning curve");
  nll->add_option("--curve-out", en.curve_out, "Where to write the learning curve CSV");

  EvalBleuArgs eb;
  auto* bl = app.add_subcommand("eval-bleu", "BLEU of candidate sentences against references");
  add_common(bl);
  bl->add_option("--candidates", eb.candidates, "Candidate sentences, one per line");
  bl->add_option("--references", eb.references, "Reference sentences, one per line");
  bl->add_option("--vocab", eb.vocab, "Vocabulary file (default: built from the references)");
  bl->add_option("--max-n", eb.max_n, "Highest n-gram order");
  bl->add_option("--len", eb.len, "Sentence length cap");
  bl->add_flag("--order-only", eb.order_only, "Score each order alone instead of cumulatively");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    apply_threads(common.threads);
    if (*make) make_oracle_cmd(common, mo);
    if (*train) train_cmd(common, tr);
    if (*samp) sample_cmd(common, sa);
    if (*nll) eval_nll_cmd(common, en);
    if (*bl) eval_bleu_cmd(eb);
  } catch (const Error& e) {
    std::cerr << "rankgan: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "rankgan: unexpected failure: " << e.what() << "\n";
    return 1;
  }
  std::cout.flush();
  return std::cout ? 0 : 1;
}
