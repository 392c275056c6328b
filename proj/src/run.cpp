#include "rankgan/run.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rankgan/checkpoint.hpp"
#include "rankgan/config.hpp"
#include "rankgan/error.hpp"

namespace rankgan {
namespace {

constexpr const char* kManifestName = "manifest.txt";

// Files whose contents are a pure function of (seed, config, inputs); wall
// timings are deliberately excluded.
std::vector<std::string> artifact_names(Mode mode) {
  std::vector<std::string> names = {"generator.ckpt", "generator.ckpt.manifest", "trainer_state.txt",
                                    "runlog.csv", "vocab.txt"};
  if (mode == Mode::kRankGan) {
    names.push_back("ranker.ckpt");
    names.push_back("ranker.ckpt.manifest");
  }
  if (mode == Mode::kBinary) {
    names.push_back("discriminator.ckpt");
    names.push_back("discriminator.ckpt.manifest");
  }
  return names;
}

std::vector<std::pair<std::string, std::string>> input_checksums(const TrainingConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("corpus", hex64(file_checksum(cfg.corpus)));
  if (!cfg.vocab.empty()) out.emplace_back("vocab", hex64(file_checksum(cfg.vocab)));
  if (!cfg.oracle.empty()) out.emplace_back("oracle", hex64(file_checksum(cfg.oracle)));
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw FormatError("cannot write " + path.string());
}

}  // namespace

std::string RunManifest::to_text() const {
  std::ostringstream out;
  out << "rankgan-run " << format_version << "\n";
  out << "mode " << mode << "\n";
  out << "seed " << seed << "\n";
  out << "completed_epochs " << completed_epochs << "\n";
  for (const auto& [name, sum] : inputs) out << "input " << name << " " << sum << "\n";
  for (const auto& [name, sum] : artifacts) out << "artifact " << name << " " << sum << "\n";
  out << "config\n" << config_text;
  return out.str();
}

RunManifest RunManifest::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  RunManifest m;
  if (!std::getline(in, line) || std::sscanf(line.c_str(), "rankgan-run %d", &m.format_version) != 1) {
    throw FormatError("not a run manifest");
  }
  if (m.format_version > kRunFormatVersion) {
    throw FormatError("run manifest format version " + std::to_string(m.format_version) +
                      " is newer than supported version " + std::to_string(kRunFormatVersion));
  }
  while (std::getline(in, line)) {
    if (line == "config") {
      std::ostringstream rest;
      rest << in.rdbuf();
      m.config_text = rest.str();
      return m;
    }
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (tag == "mode") {
      fields >> m.mode;
    } else if (tag == "seed") {
      fields >> m.seed;
    } else if (tag == "completed_epochs") {
      fields >> m.completed_epochs;
    } else if (tag == "input" || tag == "artifact") {
      std::string name, sum;
      fields >> name >> sum;
      (tag == "input" ? m.inputs : m.artifacts).emplace_back(name, sum);
    } else {
      throw FormatError("unexpected manifest line: '" + line + "'");
    }
    if (!fields) throw FormatError("malformed manifest line: '" + line + "'");
  }
  throw FormatError("run manifest has no config section");
}

void RunManifest::save(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  write_file(tmp, to_text());
  std::filesystem::rename(tmp, path);
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open run manifest " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return from_text(text.str());
}

TrainingData load_training_data(const TrainingConfig& cfg) {
  if (cfg.corpus.empty()) throw ConfigError("no corpus configured (key 'corpus')");
  TrainingData data;
  if (!cfg.oracle.empty()) {
    data.oracle.emplace(GeneratorModel::from_checkpoint(Checkpoint::load(cfg.oracle, "generator")));
  }
  std::shared_ptr<const Vocab> vocab;
  if (!cfg.vocab.empty()) {
    vocab = std::make_shared<const Vocab>(Vocab::load(cfg.vocab));
  } else if (data.oracle) {
    vocab = std::make_shared<const Vocab>(Vocab::identity(data.oracle->vocab_size()));
  } else {
    vocab = std::make_shared<const Vocab>(Vocab::build(read_lines(cfg.corpus), cfg.min_count));
  }
  Corpus all = load_corpus(cfg.corpus, vocab, cfg.fixed_len);
  if (cfg.validation_fraction > 0.0) {
    auto [train, validation] = split(all, cfg.master_seed, 1.0 - cfg.validation_fraction);
    data.train = std::move(train);
    data.validation = std::move(validation);
  } else {
    data.train = std::move(all);
    data.validation.vocab = vocab;
    data.validation.fixed_len = cfg.fixed_len;
  }
  return data;
}

RunLog run_training(const TrainingConfig& cfg, const RunOptions& opts) {
  if (opts.out_dir.empty()) throw UsageError("no output directory given");
  cfg.validate();
  const auto manifest_path = opts.out_dir / kManifestName;
  const std::string config_text = config_to_text(cfg);
  const auto inputs = input_checksums(cfg);

  std::optional<RunManifest> previous;
  if (opts.resume) {
    if (!std::filesystem::exists(manifest_path)) {
      throw UsageError("cannot resume: no run manifest in " + opts.out_dir.string());
    }
    previous = RunManifest::load(manifest_path);
    if (previous->config_text != config_text) {
      throw UsageError("cannot resume: configuration differs from the saved run");
    }
    if (previous->inputs != inputs) {
      throw UsageError("cannot resume: input files changed since the saved run");
    }
    for (const auto& [name, sum] : previous->artifacts) {
      const auto path = opts.out_dir / name;
      if (!std::filesystem::exists(path)) throw FormatError("missing run artifact " + path.string());
      if (hex64(file_checksum(path)) != sum) {
        throw FormatError("checksum mismatch for run artifact " + path.string());
      }
    }
  } else if (std::filesystem::exists(manifest_path)) {
    throw UsageError(opts.out_dir.string() + " already holds a run; resume it or pick another directory");
  }

  TrainingData data = load_training_data(cfg);
  Trainer trainer(cfg, data.train, std::move(data.oracle));
  if (previous) trainer.restore(opts.out_dir);

  std::filesystem::create_directories(opts.out_dir);
  write_file(opts.out_dir / "config.txt", config_text);
  data.train.vocab->save(opts.out_dir / "vocab.txt");

  auto checkpoint = [&](const Trainer& t) {
    t.save(opts.out_dir);
    RunManifest m;
    m.mode = mode_name(cfg.mode);
    m.seed = cfg.master_seed;
    m.completed_epochs = t.next_epoch();
    m.config_text = config_text;
    m.inputs = inputs;
    for (const std::string& name : artifact_names(cfg.mode))
      m.artifacts.emplace_back(name, hex64(file_checksum(opts.out_dir / name)));
    m.save(manifest_path);
    if (opts.verbose && !t.log().records.empty()) {
      const EpochRecord& r = t.log().records.back();
      std::cerr << "epoch " << r.epoch << " [" << r.phase << "] oracle_nll=" << r.oracle_nll
                << " g_loss=" << r.generator_loss << " critic_loss=" << r.critic_loss
                << " reward=" << r.mean_reward << " (" << r.wall_seconds << " s)\n";
    }
  };
  if (!previous) checkpoint(trainer);  // nothing run yet: records the empty state
  const std::size_t budget =
      opts.stop_after == 0 ? std::numeric_limits<std::size_t>::max() : opts.stop_after;
  trainer.run(budget, checkpoint);
  return trainer.log();
}

}  // namespace rankgan
