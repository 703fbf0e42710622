// Scalar evaluation: accuracy, OOD scores, AUROC and boxplot summaries.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evuq/autodiff/tensor.hpp"
#include "evuq/models/networks.hpp"

namespace evuq::metrics {

double accuracy(std::span<const int> predicted, std::span<const int> labels);
double accuracy(const models::Classifier& f, const ad::Tensor& x,
                std::span<const int> labels);

enum class ScoreKind { kVacuity, kDissonance, kEntropy };
enum class SetLabel { kId, kOod, kBoundary };

std::string to_string(ScoreKind kind);
/// Accepts "vac"/"vacuity", "diss"/"dissonance", "ent"/"entropy".
ScoreKind parse_score_kind(const std::string& s);

/// Thrown when a score is requested that the classifier head cannot define,
/// such as vacuity under a softmax head.
class UndefinedScoreError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Finite, non-empty per-sample scores of one kind for one population.
struct ScoreSet {
  SetLabel label = SetLabel::kId;
  ScoreKind kind = ScoreKind::kVacuity;
  std::vector<double> scores;

  void validate() const;
};

/// Per-row scores from one forward pass.
std::vector<double> sample_scores(const models::Classifier& f, const ad::Tensor& x,
                                  ScoreKind kind);
ScoreSet score_set(const models::Classifier& f, const ad::Tensor& x, ScoreKind kind,
                   SetLabel label);

/// P(pos > neg) + P(pos == neg) / 2 via midranks. Higher scores mean more
/// out-of-distribution. Throws std::invalid_argument on an empty side.
double auroc(std::span<const double> negative, std::span<const double> positive);
double auroc(const ScoreSet& negative, const ScoreSet& positive);

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

/// Linear-interpolation quantile of sorted data: position q * (n - 1).
double quantile_sorted(std::span<const double> sorted, double q);

/// Quartiles by quantile_sorted; whiskers reach the most extreme samples
/// within 1.5 IQR of the box, everything beyond is an outlier.
BoxStats boxplot_stats(std::span<const double> scores);

double mean(std::span<const double> v);

}  // namespace evuq::metrics
