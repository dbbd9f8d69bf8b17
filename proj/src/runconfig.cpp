#include "ddi/runconfig.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace ddi {

namespace {

struct KeySpec {
  const char* key;
  const char* default_value;  // nullptr: no default, must be set to be read
};

// The full key vocabulary. `seed` deliberately has no default: every run
// must pin it explicitly.
constexpr std::array<KeySpec, 27> kKeys{{
    {"seed", nullptr},
    {"output.dir", "out"},
    {"data.drugs", nullptr},
    {"data.interactions", nullptr},
    {"checkpoint", nullptr},
    {"pairs", nullptr},
    {"encoder.d", "32"},
    {"encoder.steps", "3"},
    {"encoder.heads", "8"},
    {"encoder.dropout", "0.2"},
    {"encoder.leaky_slope", "0.01"},
    {"encoder.variant", "mhcaddi"},
    {"encoder.attention_scaling", "false"},
    {"encoder.ln_eps", "1e-5"},
    {"encoder.atom_vocab", "119"},
    {"encoder.bond_types", "4"},
    {"train.objective", "binary_margin"},
    {"train.epochs", "30"},
    {"train.batch_size", "200"},
    {"train.base_lr", "0.001"},
    {"train.lr_decay", "0.96"},
    {"train.lr_decay_scale", "1e-6"},
    {"train.margin", "1"},
    {"train.printed_margin_form", "false"},
    {"train.freeze_negatives", "false"},
    {"eval.mode", "single"},
    {"eval.folds", "10"},
}};

// extra boolean toggle set by the CLI, not stored in kKeys to keep the
// table exhaustive
constexpr const char* kPerSideEffectKey = "eval.per_side_effect";

bool known_key(const std::string& key) {
  if (key == kPerSideEffectKey) return true;
  for (const auto& spec : kKeys) {
    if (key == spec.key) return true;
  }
  return false;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  for (const auto& spec : kKeys) {
    if (spec.default_value) c.values_[spec.key] = spec.default_value;
  }
  c.values_[kPerSideEffectKey] = "false";
  return c;
}

RunConfig RunConfig::from_string(const std::string& text, const std::string& origin) {
  RunConfig c = defaults();
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!known_key(key)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    c.values_[key] = value;
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_string(buffer.str(), path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string RunConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError("config key '" + key + "' is required but was not set");
  }
  return it->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const std::int64_t out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' wants an integer, got '" + v + "'");
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' wants an unsigned integer, got '" + v + "'");
  }
}

double RunConfig::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' wants a number, got '" + v + "'");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' wants a boolean, got '" + v + "'");
}

EncoderConfig RunConfig::encoder_config() const {
  EncoderConfig c;
  c.feature_dim = static_cast<std::size_t>(get_u64("encoder.d"));
  c.steps = static_cast<std::size_t>(get_u64("encoder.steps"));
  c.heads = static_cast<std::size_t>(get_u64("encoder.heads"));
  c.dropout_p = get_double("encoder.dropout");
  c.leaky_slope = get_double("encoder.leaky_slope");
  c.variant = variant_from_name(get_string("encoder.variant"));
  c.attention_scaling = get_bool("encoder.attention_scaling");
  c.layer_norm_eps = get_double("encoder.ln_eps");
  c.atom_vocab = static_cast<std::size_t>(get_u64("encoder.atom_vocab"));
  c.bond_types = static_cast<std::size_t>(get_u64("encoder.bond_types"));
  c.validate();
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.epochs = static_cast<std::size_t>(get_u64("train.epochs"));
  c.batch_size = static_cast<std::size_t>(get_u64("train.batch_size"));
  c.base_lr = get_double("train.base_lr");
  c.lr_decay = get_double("train.lr_decay");
  c.lr_decay_scale = get_double("train.lr_decay_scale");
  c.objective = objective_from_name(get_string("train.objective"));
  c.printed_margin_form = get_bool("train.printed_margin_form");
  c.freeze_negatives = get_bool("train.freeze_negatives");
  c.validate();
  return c;
}

double RunConfig::margin() const { return get_double("train.margin"); }

std::uint64_t RunConfig::seed() const {
  if (!has("seed")) {
    throw ConfigError("config key 'seed' is mandatory: runs never seed from the clock");
  }
  return get_u64("seed");
}

std::string RunConfig::output_dir() const { return get_string("output.dir"); }

std::string RunConfig::manifest() const {
  std::ostringstream os;
  for (const auto& [key, value] : values_) {
    os << key << " = " << value << "\n";
  }
  return os.str();
}

}  // namespace ddi
