#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rankgan/adversarial.hpp"

namespace rankgan {

// Flat "key = value" configuration. Blank lines and '#' comments are
// ignored; every TrainingConfig field has a key; unknown keys, repeated keys
// and malformed values raise ConfigError naming the key and line number.
// Relative paths resolve against `base_dir`.
TrainingConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
TrainingConfig load_config(const std::filesystem::path& path);

// Sets one field from its textual value; throws ConfigError on a bad key or value.
void set_config_value(TrainingConfig& cfg, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir = {});

// Canonical text form: every key, in a fixed order, with paths made absolute.
// parse_config(config_to_text(c)) == c.
std::string config_to_text(const TrainingConfig& cfg);

// All recognised keys, in canonical order.
const std::vector<std::string>& config_keys();

}  // namespace rankgan
