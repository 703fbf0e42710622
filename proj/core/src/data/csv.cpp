#include "evuq/data/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace evuq::data {
namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
bool parse_number(std::string_view cell, T& out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

template <typename T>
std::string shortest(T v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

CsvError::CsvError(Kind kind, std::size_t line, const std::string& what)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what
                              : what),
      kind_(kind),
      line_(line) {}

std::string format_real(Real v) { return shortest(v); }
std::string format_double(double v) { return shortest(v); }

Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError(CsvError::Kind::kIo, 0, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) {
    throw CsvError(CsvError::Kind::kHeader, 1, "missing header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  bool has_label = !header.empty() && header.back() == "label";
  const std::size_t dim = header.size() - (has_label ? 1 : 0);
  if (dim == 0) throw CsvError(CsvError::Kind::kHeader, 1, "no feature columns");
  for (std::size_t c = 0; c < dim; ++c) {
    if (header[c] != "f" + std::to_string(c)) {
      throw CsvError(CsvError::Kind::kHeader, 1,
                     "expected column f" + std::to_string(c) + ", got '" +
                         std::string(header[c]) + "'");
    }
  }

  std::vector<Real> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw CsvError(CsvError::Kind::kRaggedRow, line_no,
                     "expected " + std::to_string(header.size()) +
                         " cells, got " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < dim; ++c) {
      Real v{};
      if (!parse_number(cells[c], v) || !std::isfinite(v)) {
        throw CsvError(CsvError::Kind::kNonNumeric, line_no,
                       "non-numeric cell '" + std::string(cells[c]) + "'");
      }
      values.push_back(v);
    }
    if (has_label) {
      int y = 0;
      if (!parse_number(cells[dim], y)) {
        throw CsvError(CsvError::Kind::kNonNumeric, line_no,
                       "non-integer label '" + std::string(cells[dim]) + "'");
      }
      if (y < 0 || (num_classes > 0 && static_cast<std::size_t>(y) >= num_classes)) {
        throw CsvError(CsvError::Kind::kLabelOutOfRange, line_no,
                       "label " + std::to_string(y) + " out of range");
      }
      max_label = std::max(max_label, y);
      labels.push_back(y);
    }
  }
  const std::size_t rows = values.size() / dim;
  if (rows == 0) throw CsvError(CsvError::Kind::kHeader, 0, "file has no rows");

  Dataset d;
  d.features = ad::Tensor(ad::Shape{rows, dim}, std::move(values));
  d.labels = std::move(labels);
  d.num_classes = num_classes > 0 ? num_classes
                                  : static_cast<std::size_t>(max_label + 1);
  d.description = path.filename().string();
  return d;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ostringstream out;
  for (std::size_t c = 0; c < data.dim(); ++c) {
    if (c) out << ',';
    out << 'f' << c;
  }
  if (data.labeled()) out << ",label";
  out << '\n';
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t c = 0; c < data.dim(); ++c) {
      if (c) out << ',';
      out << format_real(data.features.at(r, c));
    }
    if (data.labeled()) out << ',' << data.labels[r];
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw CsvError(CsvError::Kind::kIo, 0, "cannot write " + path.string());
  file << out.str();
  if (!file) throw CsvError(CsvError::Kind::kIo, 0, "write failed for " + path.string());
}

void save_csv(const ad::Tensor& features, const std::filesystem::path& path) {
  Dataset d;
  d.features = features;
  save_csv(d, path);
}

}  // namespace evuq::data
