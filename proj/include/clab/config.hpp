#pragma once

#include <map>
#include <string>
#include <vector>

#include "clab/env.hpp"
#include "clab/oracle.hpp"
#include "clab/trainer.hpp"

namespace clab {

/// Flat key/value configuration grouped in [section] blocks. Keys and
/// sections preserve insertion order so parse -> serialize -> parse is the
/// identity.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);
  std::string serialize() const;

  bool has(const std::string& section, const std::string& key) const;
  double number(const std::string& section, const std::string& key) const;
  double number_or(const std::string& section, const std::string& key, double fallback) const;
  std::string text(const std::string& section, const std::string& key) const;
  std::string text_or(const std::string& section, const std::string& key,
                      const std::string& fallback) const;
  std::vector<double> numbers(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);

 private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };
  std::vector<Section> sections_;
  const std::string* find(const std::string& section, const std::string& key) const;
};

/// Everything the CLI needs, resolved with the simulation-table defaults.
struct AppConfig {
  MarketState market;      // the explicit instance used by `solve` and `sweep`
  EdgeProfile profile;     // base hardware profile
  SampleRanges ranges;     // sampling ranges for training/eval states
  OracleOptions oracle;
  TrainerConfig trainer;
  int compare_states = 20;
};

/// Throws std::invalid_argument with a field-level message on bad input.
AppConfig resolve_config(const Config& cfg);

/// The shipped defaults, serialisable as a starting config file.
std::string default_config_text();

}  // namespace clab
