// key=value run manifest, written by replacing the file in one rename.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace evuq::cli {

inline constexpr const char* kToolVersion = "0.1.0";

class Manifest {
 public:
  /// Replaces an existing key in place, otherwise appends.
  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }
  std::string serialize() const;
  static Manifest parse(const std::string& text);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Empty manifest when the file does not exist.
Manifest read_manifest(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames it over `path`.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

}  // namespace evuq::cli
