#include "evuq/metrics/maps.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "evuq/data/csv.hpp"
#include "evuq/metrics/metrics.hpp"
#include "evuq/models/fgsm.hpp"
#include "evuq/sl/subjective_logic.hpp"

namespace evuq::metrics {
namespace {

void fill_rows(const models::Classifier& f, const ad::Tensor& points, std::size_t begin,
               std::size_t end, UncertaintyMaps& maps) {
  if (begin >= end) return;
  const ad::Tensor x = points.rows_slice(begin, end);
  if (!f.evidential()) {
    const auto ent = sample_scores(f, x, ScoreKind::kEntropy);
    std::copy(ent.begin(), ent.end(), maps.entropy.values.begin() + static_cast<std::ptrdiff_t>(begin));
    return;
  }
  const ad::Tensor alpha = f.predict_alpha(x);
  std::vector<double> row(alpha.cols());
  for (std::size_t r = 0; r < alpha.rows(); ++r) {
    for (std::size_t c = 0; c < alpha.cols(); ++c) row[c] = alpha.at(r, c);
    const sl::DirichletParams a(row);
    maps.entropy.values[begin + r] = sl::normalized_entropy(sl::expected_probability(a));
    maps.vacuity->values[begin + r] = sl::vacuity(a);
    maps.dissonance->values[begin + r] = sl::dissonance(a);
  }
}

double parse_number(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw HeatmapFormatError("line " + std::to_string(line) + ": '" + std::string(s) +
                             "' is not a number");
  }
  return v;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

unsigned worker_count() {
  if (const char* env = std::getenv("EVUQ_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

UncertaintyMaps uncertainty_maps(const models::Classifier& f,
                                 const data::GridSpec& grid, unsigned threads) {
  const ad::Tensor points = data::gen_grid(grid);
  const std::size_t n = points.rows();
  UncertaintyMaps maps;
  maps.entropy = {grid, std::vector<double>(n)};
  if (f.evidential()) {
    maps.vacuity = Heatmap{grid, std::vector<double>(n)};
    maps.dissonance = Heatmap{grid, std::vector<double>(n)};
  }
  if (threads == 0) threads = worker_count();
  // Whole inference chunks per worker, so each row sees the same arithmetic
  // as in a single predict_alpha call over the full grid.
  const std::size_t chunks = (n + models::kInferenceChunkRows - 1) / models::kInferenceChunkRows;
  const std::size_t shards = std::min<std::size_t>(threads, chunks);
  if (shards <= 1) {
    fill_rows(f, points, 0, n, maps);
    return maps;
  }
  std::vector<std::thread> workers;
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t begin = std::min(n, chunks * s / shards * models::kInferenceChunkRows);
    const std::size_t end = std::min(n, chunks * (s + 1) / shards * models::kInferenceChunkRows);
    workers.emplace_back(fill_rows, std::cref(f), std::cref(points), begin, end, std::ref(maps));
  }
  for (auto& w : workers) w.join();
  return maps;
}

std::vector<SweepRow> fgsm_sweep(const models::Classifier& f,
                                 const data::Dataset& test,
                                 std::span<const double> epsilons) {
  if (!test.labeled()) throw std::invalid_argument("FGSM sweep needs labels");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] >= 0.0 && epsilons[i] <= 0.5)) {
      throw std::invalid_argument("epsilon values must lie in [0, 0.5]");
    }
    if (i > 0 && epsilons[i] < epsilons[i - 1]) {
      throw std::invalid_argument("epsilon values must not decrease");
    }
  }
  std::vector<SweepRow> rows;
  for (double eps : epsilons) {
    const ad::Tensor x = models::fgsm_perturb(f, test.features, test.labels, eps);
    const auto ent = sample_scores(f, x, ScoreKind::kEntropy);
    rows.push_back({eps, accuracy(f, x, test.labels), mean(ent)});
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::filesystem::path& path) {
  std::ostringstream out;
  out << "epsilon,accuracy,mean_entropy\n";
  for (const auto& r : rows) {
    out << data::format_double(r.epsilon) << ',' << data::format_double(r.accuracy) << ','
        << data::format_double(r.mean_entropy) << '\n';
  }
  write_text(path, out.str());
}

std::string heatmap_csv(const Heatmap& map) {
  map.grid.validate();
  if (map.values.size() != map.grid.point_count()) {
    throw std::invalid_argument("heatmap value count does not match its grid");
  }
  const ad::Tensor points = data::gen_grid(map.grid);
  std::ostringstream out;
  out << "# grid x_min=" << data::format_double(map.grid.x_min)
      << " x_max=" << data::format_double(map.grid.x_max)
      << " y_min=" << data::format_double(map.grid.y_min)
      << " y_max=" << data::format_double(map.grid.y_max) << " x_res=" << map.grid.x_res
      << " y_res=" << map.grid.y_res << '\n';
  out << "x,y,value\n";
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    out << data::format_real(points.at(i, 0)) << ',' << data::format_real(points.at(i, 1))
        << ',' << data::format_double(map.values[i]) << '\n';
  }
  return out.str();
}

Heatmap parse_heatmap_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# grid ", 0) != 0) {
    throw HeatmapFormatError("line 1: missing '# grid' specification");
  }
  Heatmap map;
  std::istringstream spec(line.substr(7));
  std::string field;
  int seen = 0;
  while (spec >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw HeatmapFormatError("line 1: bad field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const double v = parse_number(std::string_view(field).substr(eq + 1), 1);
    if (key == "x_min") map.grid.x_min = v;
    else if (key == "x_max") map.grid.x_max = v;
    else if (key == "y_min") map.grid.y_min = v;
    else if (key == "y_max") map.grid.y_max = v;
    else if (key == "x_res") map.grid.x_res = static_cast<std::size_t>(v);
    else if (key == "y_res") map.grid.y_res = static_cast<std::size_t>(v);
    else throw HeatmapFormatError("line 1: unknown field '" + key + "'");
    ++seen;
  }
  if (seen != 6) throw HeatmapFormatError("line 1: incomplete grid specification");
  try {
    map.grid.validate();
  } catch (const std::invalid_argument& e) {
    throw HeatmapFormatError(std::string("line 1: ") + e.what());
  }
  if (!std::getline(in, line) || line != "x,y,value") {
    throw HeatmapFormatError("line 2: expected header x,y,value");
  }
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
      throw HeatmapFormatError("line " + std::to_string(line_no) + ": expected 3 fields");
    }
    map.values.push_back(parse_number(std::string_view(line).substr(c2 + 1), line_no));
  }
  if (map.values.size() != map.grid.point_count()) {
    throw HeatmapFormatError("expected " + std::to_string(map.grid.point_count()) +
                             " rows, found " + std::to_string(map.values.size()));
  }
  return map;
}

Heatmap load_heatmap_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_heatmap_csv(buf.str());
}

std::string heatmap_pgm(const Heatmap& map) {
  map.grid.validate();
  if (map.values.size() != map.grid.point_count()) {
    throw std::invalid_argument("heatmap value count does not match its grid");
  }
  std::ostringstream out;
  out << "P2\n" << map.grid.x_res << ' ' << map.grid.y_res << "\n255\n";
  std::size_t width = 0;
  for (std::size_t r = 0; r < map.grid.y_res; ++r) {
    const std::size_t iy = map.grid.y_res - 1 - r;
    for (std::size_t ix = 0; ix < map.grid.x_res; ++ix) {
      const double v = map.values[iy * map.grid.x_res + ix];
      if (!std::isfinite(v)) throw std::invalid_argument("heatmap holds a non-finite value");
      const int level = static_cast<int>(std::floor(255.0 * std::clamp(v, 0.0, 1.0) + 0.5));
      const std::string token = std::to_string(level);
      // Plain PGM lines stay within 70 characters.
      if (width > 0 && width + 1 + token.size() > 70) {
        out << '\n';
        width = 0;
      }
      if (width > 0) {
        out << ' ';
        ++width;
      }
      out << token;
      width += token.size();
    }
    out << '\n';
    width = 0;
  }
  return out.str();
}

void export_heatmap(const Heatmap& map, const std::filesystem::path& csv_path,
                    const std::filesystem::path& pgm_path) {
  const std::string csv = heatmap_csv(map);
  const std::string pgm = heatmap_pgm(map);
  write_text(csv_path, csv);
  write_text(pgm_path, pgm);
}

}  // namespace evuq::metrics
