#include "vppnet/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace vppnet {

namespace {

using Setter = std::function<void(const std::string&)>;

long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing chars");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "config: field '" + key + "' expects an integer, got '" +
                               value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing chars");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "config: field '" + key + "' expects a number, got '" +
                               value + "'");
  }
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

void parse_key_values(std::istream& is,
                      const std::map<std::string, Setter>& schema) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "config line " + std::to_string(lineno) +
                                ": expected key=value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto it = schema.find(key);
    if (it == schema.end()) {
      throw ConfigError(key, "config: unknown field '" + key + "'");
    }
    it->second(value);
  }
}

}  // namespace

DataGenConfig parse_datagen_config(std::istream& is) {
  DataGenConfig cfg;
  const std::map<std::string, Setter> schema = {
      {"n_agents_max", [&](const std::string& v) { cfg.n_agents_max = static_cast<int>(parse_int("n_agents_max", v)); }},
      {"cap_low", [&](const std::string& v) { cfg.cap_low = parse_double("cap_low", v); }},
      {"cap_high", [&](const std::string& v) { cfg.cap_high = parse_double("cap_high", v); }},
      {"fluctuation", [&](const std::string& v) { cfg.fluctuation = parse_double("fluctuation", v); }},
      {"n_samples", [&](const std::string& v) { cfg.n_samples = static_cast<int>(parse_int("n_samples", v)); }},
      {"n_test", [&](const std::string& v) { cfg.n_test = static_cast<int>(parse_int("n_test", v)); }},
      {"subset_min", [&](const std::string& v) { cfg.subset_min = static_cast<int>(parse_int("subset_min", v)); }},
      {"p_omax", [&](const std::string& v) { cfg.p_omax = parse_double("p_omax", v); }},
      {"seed", [&](const std::string& v) { cfg.seed = static_cast<std::uint64_t>(parse_int("seed", v)); }},
  };
  parse_key_values(is, schema);
  cfg.validate();
  return cfg;
}

TrainRunConfig parse_train_config(std::istream& is) {
  TrainRunConfig cfg;
  const std::map<std::string, Setter> schema = {
      {"loss_mode",
       [&](const std::string& v) {
         if (v == "objective") {
           cfg.train.loss_mode = LossMode::kObjective;
         } else if (v == "supervised") {
           cfg.train.loss_mode = LossMode::kSupervised;
         } else {
           throw ConfigError("loss_mode",
                             "config: loss_mode must be 'objective' or "
                             "'supervised', got '" + v + "'");
         }
       }},
      {"epochs", [&](const std::string& v) { cfg.train.epochs = static_cast<int>(parse_int("epochs", v)); }},
      {"batch_size", [&](const std::string& v) { cfg.train.batch_size = static_cast<int>(parse_int("batch_size", v)); }},
      {"learning_rate", [&](const std::string& v) { cfg.train.learning_rate = parse_double("learning_rate", v); }},
      {"adam_beta1", [&](const std::string& v) { cfg.train.adam_beta1 = parse_double("adam_beta1", v); }},
      {"adam_beta2", [&](const std::string& v) { cfg.train.adam_beta2 = parse_double("adam_beta2", v); }},
      {"adam_epsilon", [&](const std::string& v) { cfg.train.adam_epsilon = parse_double("adam_epsilon", v); }},
      {"seed", [&](const std::string& v) { cfg.train.seed = static_cast<std::uint64_t>(parse_int("seed", v)); }},
      {"d_hidden", [&](const std::string& v) { cfg.hyper.d_h = static_cast<int>(parse_int("d_hidden", v)); }},
      {"n_blocks", [&](const std::string& v) { cfg.hyper.n_blocks = static_cast<int>(parse_int("n_blocks", v)); }},
      {"holdout", [&](const std::string& v) { cfg.holdout = static_cast<int>(parse_int("holdout", v)); }},
  };
  parse_key_values(is, schema);
  cfg.train.validate();
  if (cfg.hyper.d_h < 1) throw ConfigError("d_hidden", "d_hidden must be >= 1");
  if (cfg.hyper.n_blocks < 1) {
    throw ConfigError("n_blocks", "n_blocks must be >= 1");
  }
  if (cfg.holdout < 0) throw ConfigError("holdout", "holdout must be >= 0");
  return cfg;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

DataGenConfig parse_datagen_config_file(const std::string& path) {
  std::istringstream is(slurp(path));
  return parse_datagen_config(is);
}

TrainRunConfig parse_train_config_file(const std::string& path) {
  std::istringstream is(slurp(path));
  return parse_train_config(is);
}

std::string config_digest_file(const std::string& path) {
  return hex64(fnv1a64(slurp(path)));
}

std::string file_header(std::uint64_t seed, const std::string& digest) {
  return "vppnet " + std::string(kVersion) + " seed=" + std::to_string(seed) +
         " config=" + digest;
}

}  // namespace vppnet
