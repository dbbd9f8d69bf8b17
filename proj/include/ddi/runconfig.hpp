#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ddi/encoder.hpp"
#include "ddi/train.hpp"

namespace ddi {

// Line-oriented `key = value` configuration with dotted section keys.
// Unknown keys are rejected; command-line flags override file values; the
// fully resolved set (defaults included) round-trips through the manifest.
class RunConfig {
 public:
  static RunConfig load(const std::string& path);
  static RunConfig from_string(const std::string& text, const std::string& origin);
  static RunConfig defaults();

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // Typed views over the resolved keys.
  EncoderConfig encoder_config() const;
  TrainConfig train_config() const;
  double margin() const;
  std::uint64_t seed() const;  // mandatory, never wall-clock
  std::string output_dir() const;

  // Every key with its resolved value, sorted, one `key = value` per line.
  // Feeding the manifest back through load() reproduces the run.
  std::string manifest() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ddi
