// Subjective Logic opinions over Dirichlet-distributed class probabilities.
//
// Everything here is 64-bit and free of the autodiff engine so the closed
// forms can be tested to tight tolerances. Base rates are uniform (1/K) and
// the non-informative prior weight W equals K, which gives alpha = r + 1.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace evuq::sl {

/// Raised when an input violates the domain of an SL operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Tolerance used for the additivity and base-rate invariants.
inline constexpr double kMassTolerance = 1e-9;

/// Non-negative per-class evidence r.
class EvidenceVector {
 public:
  explicit EvidenceVector(std::vector<double> r);

  std::span<const double> values() const { return r_; }
  std::size_t num_classes() const { return r_.size(); }

 private:
  std::vector<double> r_;
};

/// Dirichlet strength vector alpha with alpha[y] >= 1.
class DirichletParams {
 public:
  explicit DirichletParams(std::vector<double> alpha);

  std::span<const double> alpha() const { return alpha_; }
  std::size_t num_classes() const { return alpha_.size(); }
  /// S = sum(alpha).
  double strength() const { return strength_; }

 private:
  std::vector<double> alpha_;
  double strength_ = 0.0;
};

/// Multinomial opinion (b, u, a). The constructor enforces additivity.
class Opinion {
 public:
  Opinion(std::vector<double> beliefs, double uncertainty,
          std::vector<double> base_rates);
  /// Opinion with uniform base rate 1/K.
  Opinion(std::vector<double> beliefs, double uncertainty);

  std::span<const double> beliefs() const { return beliefs_; }
  double uncertainty() const { return uncertainty_; }
  std::span<const double> base_rates() const { return base_rates_; }
  std::size_t num_classes() const { return beliefs_.size(); }

 private:
  std::vector<double> beliefs_;
  double uncertainty_;
  std::vector<double> base_rates_;
};

DirichletParams alpha_from_evidence(const EvidenceVector& r);
Opinion opinion_from_alpha(const DirichletParams& a);

/// p(y) = b(y) + a(y) u.
std::vector<double> projected_probability(const Opinion& o);
/// E(y) = alpha(y) / S.
std::vector<double> expected_probability(const DirichletParams& a);

/// Vac = W / S = K / S.
double vacuity(const DirichletParams& a);

/// Relative mass balance of two belief masses; 0 when either is zero.
double balance(double b_j, double b_i);

/// Belief-weighted average balance over all singleton pairs. Terms whose
/// competing belief mass is zero contribute nothing.
double dissonance(const DirichletParams& a);
double dissonance(const Opinion& o);

/// log Dir(p; alpha). Throws DomainError if p is not on the open simplex.
double dirichlet_log_pdf(const DirichletParams& a, std::span<const double> p);

/// Shannon entropy divided by ln K, with 0 log 0 = 0.
double normalized_entropy(std::span<const double> p);

}  // namespace evuq::sl
