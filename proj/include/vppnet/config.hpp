#ifndef VPPNET_CONFIG_HPP
#define VPPNET_CONFIG_HPP

#include <iosfwd>
#include <string>

#include "vppnet/neural.hpp"
#include "vppnet/pipeline.hpp"

namespace vppnet {

/// Model and run settings of the train command, parsed from one file.
struct TrainRunConfig {
  TrainConfig train;
  HyperParams hyper;     // d_hidden / n_blocks keys
  int holdout = 100;     // trailing samples excluded from training
};

/// Flat key=value format, '#' comments and blank lines allowed. Unknown keys
/// are errors (ConfigError naming the key), as are out-of-range values.
DataGenConfig parse_datagen_config(std::istream& is);
TrainRunConfig parse_train_config(std::istream& is);

DataGenConfig parse_datagen_config_file(const std::string& path);
TrainRunConfig parse_train_config_file(const std::string& path);

/// FNV-1a digest of a config file's bytes, for output file headers.
std::string config_digest_file(const std::string& path);

/// Standard header line content for generated files:
/// "vppnet <version> seed=<seed> config=<digest>".
std::string file_header(std::uint64_t seed, const std::string& digest);

}  // namespace vppnet

#endif  // VPPNET_CONFIG_HPP
