#include "evuq/sl/subjective_logic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace evuq::sl {
namespace {

constexpr double kSimplexTolerance = 1e-6;

void require_classes(std::size_t k) {
  if (k < 2) throw DomainError("at least two classes are required");
}

}  // namespace

EvidenceVector::EvidenceVector(std::vector<double> r) : r_(std::move(r)) {
  require_classes(r_.size());
  for (std::size_t y = 0; y < r_.size(); ++y) {
    if (!(r_[y] >= 0.0) || !std::isfinite(r_[y])) {
      throw DomainError("evidence[" + std::to_string(y) +
                        "] must be finite and non-negative");
    }
  }
}

DirichletParams::DirichletParams(std::vector<double> alpha)
    : alpha_(std::move(alpha)) {
  require_classes(alpha_.size());
  for (std::size_t y = 0; y < alpha_.size(); ++y) {
    if (!(alpha_[y] >= 1.0) || !std::isfinite(alpha_[y])) {
      throw DomainError("alpha[" + std::to_string(y) +
                        "] must be finite and >= 1");
    }
  }
  strength_ = std::accumulate(alpha_.begin(), alpha_.end(), 0.0);
}

Opinion::Opinion(std::vector<double> beliefs, double uncertainty,
                 std::vector<double> base_rates)
    : beliefs_(std::move(beliefs)),
      uncertainty_(uncertainty),
      base_rates_(std::move(base_rates)) {
  require_classes(beliefs_.size());
  if (base_rates_.size() != beliefs_.size()) {
    throw DomainError("base rate size differs from belief size");
  }
  double mass = uncertainty_;
  for (double b : beliefs_) {
    if (!(b >= 0.0)) throw DomainError("belief masses must be non-negative");
    mass += b;
  }
  if (!(uncertainty_ >= 0.0) || uncertainty_ > 1.0) {
    throw DomainError("uncertainty mass must lie in [0, 1]");
  }
  if (std::abs(mass - 1.0) > kMassTolerance) {
    throw DomainError("belief masses plus uncertainty must sum to 1");
  }
  double rate_sum = 0.0;
  for (double a : base_rates_) {
    if (!(a > 0.0)) throw DomainError("base rates must be positive");
    rate_sum += a;
  }
  if (std::abs(rate_sum - 1.0) > kMassTolerance) {
    throw DomainError("base rates must sum to 1");
  }
}

Opinion::Opinion(std::vector<double> beliefs, double uncertainty)
    : Opinion(beliefs, uncertainty,
              std::vector<double>(beliefs.size(),
                                  beliefs.empty() ? 0.0 : 1.0 / beliefs.size())) {}

DirichletParams alpha_from_evidence(const EvidenceVector& r) {
  const auto k = static_cast<double>(r.num_classes());
  const double base_rate = 1.0 / k;
  const double prior_weight = k;
  std::vector<double> alpha(r.num_classes());
  for (std::size_t y = 0; y < alpha.size(); ++y) {
    alpha[y] = r.values()[y] + base_rate * prior_weight;
  }
  return DirichletParams(std::move(alpha));
}

Opinion opinion_from_alpha(const DirichletParams& a) {
  const double s = a.strength();
  std::vector<double> beliefs(a.num_classes());
  for (std::size_t y = 0; y < beliefs.size(); ++y) {
    beliefs[y] = (a.alpha()[y] - 1.0) / s;
  }
  return Opinion(std::move(beliefs), static_cast<double>(a.num_classes()) / s);
}

std::vector<double> projected_probability(const Opinion& o) {
  std::vector<double> p(o.num_classes());
  for (std::size_t y = 0; y < p.size(); ++y) {
    p[y] = o.beliefs()[y] + o.base_rates()[y] * o.uncertainty();
  }
  return p;
}

std::vector<double> expected_probability(const DirichletParams& a) {
  std::vector<double> p(a.num_classes());
  for (std::size_t y = 0; y < p.size(); ++y) p[y] = a.alpha()[y] / a.strength();
  return p;
}

double vacuity(const DirichletParams& a) {
  return static_cast<double>(a.num_classes()) / a.strength();
}

double balance(double b_j, double b_i) {
  if (b_j * b_i == 0.0) return 0.0;
  return 1.0 - std::abs(b_j - b_i) / (b_j + b_i);
}

double dissonance(const Opinion& o) {
  const auto b = o.beliefs();
  double total = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    double weighted = 0.0;
    double others = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (j == i) continue;
      weighted += b[j] * balance(b[j], b[i]);
      others += b[j];
    }
    if (others > 0.0) total += b[i] * weighted / others;
  }
  return total;
}

double dissonance(const DirichletParams& a) {
  return dissonance(opinion_from_alpha(a));
}

double dirichlet_log_pdf(const DirichletParams& a, std::span<const double> p) {
  if (p.size() != a.num_classes()) {
    throw DomainError("probability vector size differs from alpha size");
  }
  double sum = 0.0;
  for (double v : p) {
    if (!(v > 0.0) || !(v < 1.0)) {
      throw DomainError("probability vector must lie on the open simplex");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw DomainError("probability vector must sum to 1");
  }
  // log(1/B(alpha)) = lgamma(S) - sum lgamma(alpha_y)
  double log_density = std::lgamma(a.strength());
  for (std::size_t y = 0; y < p.size(); ++y) {
    log_density -= std::lgamma(a.alpha()[y]);
    log_density += (a.alpha()[y] - 1.0) * std::log(p[y]);
  }
  return log_density;
}

double normalized_entropy(std::span<const double> p) {
  if (p.size() < 2) return 0.0;
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::clamp(h / std::log(static_cast<double>(p.size())), 0.0, 1.0);
}

}  // namespace evuq::sl
