// Named-tensor archive.
//
// Layout: a text manifest followed by a raw payload of little-endian 32-bit
// floats.
//
//   evuq-checkpoint 1
//   meta <key> <value>            (sorted by key; value runs to end of line)
//   tensor <name> <rank> <dims...> <offset> <count>
//   payload <bytes>
//   <payload bytes>
//
// Offsets are in bytes from the start of the payload.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evuq/autodiff/optim.hpp"
#include "evuq/models/networks.hpp"

namespace evuq::models {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointIoError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CorruptManifestError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointShapeError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class TruncatedPayloadError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct NamedTensor {
  std::string name;
  ad::Tensor value;
};

struct Archive {
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;

  const ad::Tensor* find(const std::string& name) const;
};

void save_archive(const std::filesystem::path& path, const Archive& archive);
Archive load_archive(const std::filesystem::path& path);

/// Everything a training command persists.
struct ModelBundle {
  std::string model_kind;  // l2 | enn | wenn
  std::string config_hash;
  std::int64_t iteration = 0;
  std::optional<Classifier> classifier;
  std::optional<Generator> generator;
  std::optional<Discriminator> discriminator;
  std::optional<ad::AdamState> classifier_opt;
  std::optional<ad::AdamState> generator_opt;
  std::optional<ad::AdamState> discriminator_opt;
};

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle);

/// Loads a bundle. A config hash differing from `expected_hash` adds an
/// entry to `warnings` and is echoed on stderr; it is never silently ignored.
ModelBundle load_checkpoint(const std::filesystem::path& path,
                            const std::optional<std::string>& expected_hash = {},
                            std::vector<std::string>* warnings = nullptr);

}  // namespace evuq::models
