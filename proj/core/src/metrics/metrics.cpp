#include "evuq/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evuq/sl/subjective_logic.hpp"

namespace evuq::metrics {

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size() || labels.empty()) {
    throw std::invalid_argument("accuracy needs equally sized, non-empty label lists");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double accuracy(const models::Classifier& f, const ad::Tensor& x,
                std::span<const int> labels) {
  const auto pred = f.predict_labels(x);
  return accuracy(pred, labels);
}

std::string to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kVacuity: return "vacuity";
    case ScoreKind::kDissonance: return "dissonance";
    case ScoreKind::kEntropy: return "entropy";
  }
  return "unknown";
}

ScoreKind parse_score_kind(const std::string& s) {
  if (s == "vac" || s == "vacuity") return ScoreKind::kVacuity;
  if (s == "diss" || s == "dissonance") return ScoreKind::kDissonance;
  if (s == "ent" || s == "entropy") return ScoreKind::kEntropy;
  throw std::invalid_argument("unknown score kind '" + s + "'");
}

void ScoreSet::validate() const {
  if (scores.empty()) throw std::invalid_argument("score set is empty");
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("score set holds a non-finite value");
  }
}

std::vector<double> sample_scores(const models::Classifier& f, const ad::Tensor& x,
                                  ScoreKind kind) {
  std::vector<double> out(x.rows());
  if (!f.evidential()) {
    if (kind != ScoreKind::kEntropy) {
      throw UndefinedScoreError(to_string(kind) + " is undefined for a softmax head");
    }
    const ad::Tensor p = f.predict_probabilities(x);
    std::vector<double> row(p.cols());
    for (std::size_t r = 0; r < p.rows(); ++r) {
      for (std::size_t c = 0; c < p.cols(); ++c) row[c] = p.at(r, c);
      out[r] = sl::normalized_entropy(row);
    }
    return out;
  }
  const ad::Tensor alpha = f.predict_alpha(x);
  std::vector<double> row(alpha.cols());
  for (std::size_t r = 0; r < alpha.rows(); ++r) {
    for (std::size_t c = 0; c < alpha.cols(); ++c) row[c] = alpha.at(r, c);
    const sl::DirichletParams a(row);
    switch (kind) {
      case ScoreKind::kVacuity: out[r] = sl::vacuity(a); break;
      case ScoreKind::kDissonance: out[r] = sl::dissonance(a); break;
      case ScoreKind::kEntropy:
        out[r] = sl::normalized_entropy(sl::expected_probability(a));
        break;
    }
  }
  return out;
}

ScoreSet score_set(const models::Classifier& f, const ad::Tensor& x, ScoreKind kind,
                   SetLabel label) {
  ScoreSet s{label, kind, sample_scores(f, x, kind)};
  s.validate();
  return s;
}

double auroc(std::span<const double> negative, std::span<const double> positive) {
  if (negative.empty() || positive.empty()) {
    throw std::invalid_argument("AUROC needs non-empty negative and positive sets");
  }
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(negative.size() + positive.size());
  for (double s : negative) items.push_back({s, false});
  for (double s : positive) items.push_back({s, true});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });
  // Twice the rank sum keeps midranks integral.
  std::uint64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    const std::uint64_t twice_midrank = (i + 1) + j;  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (items[k].positive) twice_rank_sum += twice_midrank;
    }
    i = j;
  }
  const std::uint64_t np = positive.size();
  const std::uint64_t twice_u = twice_rank_sum - np * (np + 1);
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(negative.size()) * static_cast<double>(np));
}

double auroc(const ScoreSet& negative, const ScoreSet& positive) {
  negative.validate();
  positive.validate();
  if (negative.kind != positive.kind) {
    throw std::invalid_argument("AUROC compares score sets of one kind");
  }
  return auroc(negative.scores, positive.scores);
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats boxplot_stats(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("boxplot of an empty sample");
  std::vector<double> v(scores.begin(), scores.end());
  std::sort(v.begin(), v.end());
  BoxStats b;
  b.min = v.front();
  b.max = v.back();
  b.q1 = quantile_sorted(v, 0.25);
  b.median = quantile_sorted(v, 0.5);
  b.q3 = quantile_sorted(v, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  for (double s : v) {
    if (s < lo_fence || s > hi_fence) {
      b.outliers.push_back(s);
    } else {
      b.whisker_low = std::min(b.whisker_low, s);
      b.whisker_high = std::max(b.whisker_high, s);
    }
  }
  return b;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace evuq::metrics
