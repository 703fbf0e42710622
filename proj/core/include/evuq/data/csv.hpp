// Dataset CSV files: header `f0,...,f{L-1}[,label]`, UTF-8, LF endings,
// '.' decimal separator. Floats are written in shortest round-trip form.
#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "evuq/data/dataset.hpp"

namespace evuq::data {

class CsvError : public std::runtime_error {
 public:
  enum class Kind { kIo, kHeader, kRaggedRow, kNonNumeric, kLabelOutOfRange };

  CsvError(Kind kind, std::size_t line, const std::string& what);
  Kind kind() const { return kind_; }
  /// 1-based line number, 0 when not tied to a line.
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

/// Shortest decimal form that parses back to the same value.
std::string format_real(Real v);
std::string format_double(double v);

/// Reads a dataset. With num_classes > 0 labels must lie in [0, num_classes);
/// otherwise they must be non-negative and num_classes becomes max + 1.
Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes = 0);
void save_csv(const Dataset& data, const std::filesystem::path& path);
/// Unlabeled convenience overload.
void save_csv(const ad::Tensor& features, const std::filesystem::path& path);

}  // namespace evuq::data
