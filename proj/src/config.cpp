#include "rankgan/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <set>
#include <sstream>

#include "rankgan/error.hpp"

namespace rankgan {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_integer<std::size_t>(key, trim(item)));
  if (out.empty()) throw ConfigError("key '" + key + "': expected a comma-separated list");
  return out;
}

std::filesystem::path resolve(const std::string& v, const std::filesystem::path& base) {
  if (v.empty()) return {};
  std::filesystem::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

std::string real_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Entry {
  std::string key;
  std::function<void(TrainingConfig&, const std::string&, const std::filesystem::path&)> set;
  std::function<std::string(const TrainingConfig&)> get;
};

#define RKGN_COUNT(name, field)                                                           \
  Entry {                                                                                 \
    name,                                                                                 \
        [](TrainingConfig& c, const std::string& v, const std::filesystem::path&) {        \
          c.field = parse_integer<decltype(c.field)>(name, v);                             \
        },                                                                                \
        [](const TrainingConfig& c) { return std::to_string(c.field); }                    \
  }
#define RKGN_REAL(name, field)                                                            \
  Entry {                                                                                 \
    name,                                                                                 \
        [](TrainingConfig& c, const std::string& v, const std::filesystem::path&) {        \
          c.field = parse_real(name, v);                                                  \
        },                                                                                \
        [](const TrainingConfig& c) { return real_text(c.field); }                         \
  }
#define RKGN_PATH(name, field)                                                            \
  Entry {                                                                                 \
    name,                                                                                 \
        [](TrainingConfig& c, const std::string& v, const std::filesystem::path& base) {   \
          c.field = resolve(v, base);                                                     \
        },                                                                                \
        [](const TrainingConfig& c) {                                                     \
          return c.field.empty() ? std::string() : std::filesystem::absolute(c.field).string(); \
        }                                                                                 \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{"mode",
            [](TrainingConfig& c, const std::string& v, const std::filesystem::path&) {
              c.mode = parse_mode(v);
            },
            [](const TrainingConfig& c) { return mode_name(c.mode); }},
      RKGN_COUNT("seed", master_seed),
      RKGN_COUNT("pretrain_epochs", pretrain_epochs),
      RKGN_COUNT("adversarial_rounds", adversarial_rounds),
      RKGN_COUNT("g_steps", g_steps),
      RKGN_COUNT("r_steps", r_steps),
      RKGN_COUNT("critic_pretrain_steps", critic_pretrain_steps),
      RKGN_COUNT("batch_size", batch_size),
      RKGN_COUNT("ref_size", ref_size),
      RKGN_COUNT("comparison_size", comparison_size),
      RKGN_COUNT("rollout_n", rollout_n),
      RKGN_REAL("gamma", gamma),
      RKGN_REAL("lr_mle", lr_mle),
      RKGN_REAL("lr_generator", lr_generator),
      RKGN_REAL("lr_ranker", lr_ranker),
      RKGN_REAL("clip_norm", clip_norm),
      Entry{"reward_baseline",
            [](TrainingConfig& c, const std::string& v, const std::filesystem::path&) {
              c.reward_baseline = parse_bool("reward_baseline", v);
            },
            [](const TrainingConfig& c) { return std::string(c.reward_baseline ? "true" : "false"); }},
      RKGN_REAL("baseline_decay", baseline_decay),
      RKGN_COUNT("fixed_len", fixed_len),
      RKGN_COUNT("embed_dim", embed_dim),
      RKGN_COUNT("hidden_dim", hidden_dim),
      RKGN_COUNT("ranker_embed_dim", ranker_embed_dim),
      Entry{"ranker_widths",
            [](TrainingConfig& c, const std::string& v, const std::filesystem::path&) {
              c.ranker_widths = parse_list("ranker_widths", v);
            },
            [](const TrainingConfig& c) {
              std::string out;
              for (std::size_t w : c.ranker_widths) out += (out.empty() ? "" : ",") + std::to_string(w);
              return out;
            }},
      RKGN_COUNT("ranker_filters", ranker_filters),
      RKGN_COUNT("bleu_order", bleu_order),
      RKGN_COUNT("bleu_refs", bleu_refs),
      RKGN_COUNT("eval_samples", eval_samples),
      RKGN_PATH("corpus", corpus),
      RKGN_PATH("vocab", vocab),
      RKGN_PATH("oracle", oracle),
      RKGN_COUNT("min_count", min_count),
      RKGN_REAL("validation_fraction", validation_fraction),
  };
  return table;
}

#undef RKGN_COUNT
#undef RKGN_REAL
#undef RKGN_PATH

const Entry* find_entry(const std::string& key) {
  for (const Entry& e : entries())
    if (e.key == key) return &e;
  return nullptr;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const Entry& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void set_config_value(TrainingConfig& cfg, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir) {
  const Entry* e = find_entry(key);
  if (!e) throw ConfigError("unknown key '" + key + "'");
  e->set(cfg, value, base_dir);
}

TrainingConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  TrainingConfig cfg;
  std::set<std::string> seen;
  std::string raw;
  for (int line_no = 1; std::getline(in, raw); ++line_no) {
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto where = " (line " + std::to_string(line_no) + ")";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'" + where);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("missing key before '='" + where);
    if (!seen.insert(key).second) throw ConfigError("key '" + key + "' repeated" + where);
    try {
      set_config_value(cfg, key, value, base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what() + where);
    }
  }
  cfg.validate();
  return cfg;
}

TrainingConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.parent_path());
}

std::string config_to_text(const TrainingConfig& cfg) {
  std::string out;
  for (const Entry& e : entries()) out += e.key + " = " + e.get(cfg) + "\n";
  return out;
}

}  // namespace rankgan
