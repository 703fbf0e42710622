// Flat key=value run configuration shared by every command.
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "evuq/data/dataset.hpp"
#include "evuq/models/mlp.hpp"
#include "evuq/models/networks.hpp"
#include "evuq/trainer/trainer.hpp"

namespace evuq::cli {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  trainer::TrainConfig train;
  std::vector<std::size_t> classifier_hidden{500, 500};
  std::vector<std::size_t> generator_hidden{128, 128};
  std::vector<std::size_t> critic_hidden{128, 128};
  models::LatentPrior latent_prior = models::LatentPrior::kGaussian;
  /// Multiplier on the generator's initial output layer.
  double generator_init_scale = 1.0;
  std::size_t n_per_class = 1000;
  double train_fraction = 0.8;

  models::MlpSpec classifier_spec(bool evidential) const;
  models::MlpSpec generator_spec() const;
  models::MlpSpec critic_spec() const;

  /// Every key, sorted, one `key=value` per line.
  std::string serialize() const;
  /// 16 hex digits of the FNV-1a digest of serialize().
  std::string hash() const;
};

/// Parses `key=value` lines. Blank lines and lines starting with '#' are
/// skipped; unknown or repeated keys and malformed values raise ConfigError.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace evuq::cli
