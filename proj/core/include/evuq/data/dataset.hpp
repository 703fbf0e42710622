#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "evuq/autodiff/tensor.hpp"
#include "evuq/data/rng.hpp"

namespace evuq::data {

/// Feature matrix plus optional integer labels in [0, num_classes).
struct Dataset {
  ad::Tensor features;  // N x L
  std::vector<int> labels;  // empty for unlabeled sets
  std::size_t num_classes = 0;
  std::string description;
  std::uint64_t seed = 0;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  bool labeled() const { return !labels.empty(); }

  /// Throws std::invalid_argument if any invariant is broken.
  void validate() const;
  /// Rows selected by `indices`, in that order.
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// The known three-class isotropic mixture the synthetic data is drawn from.
struct GaussianMixture {
  std::vector<std::array<double, 2>> means;
  double variance = 4.0;

  /// Means on an equilateral triangle of circumradius 4 about the origin:
  /// (0, 4), (-2 sqrt 3, -2), (2 sqrt 3, -2); variance 4.
  static GaussianMixture synthetic();
  /// Class posteriors under equal priors.
  std::vector<double> posterior(double x, double y) const;
};

Dataset gen_gaussian_mixture(std::size_t n_per_class, std::uint64_t seed,
                             const GaussianMixture& mixture =
                                 GaussianMixture::synthetic());

/// Seeded split keeping `train_fraction` of every class in the first set.
std::pair<Dataset, Dataset> stratified_split(const Dataset& data,
                                             double train_fraction,
                                             std::uint64_t seed);

/// Axis-aligned square with an excluded central disk.
struct OodBox {
  double lo = -20.0;
  double hi = 20.0;
  double min_radius = 12.0;
};

/// Uniform points in the box, rejecting points closer than min_radius to the
/// origin. Throws std::invalid_argument for a degenerate box.
ad::Tensor gen_uniform_ood(std::size_t n, const OodBox& box,
                           std::uint64_t seed);

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BoundaryStrip {
  double max_gap = 0.1;          // top-two posterior difference
  double support_radius = 8.0;   // |x| bound
  std::size_t max_attempts = 1'000'000;
};

/// True when x lies in the strip: inside the support disk with the two
/// largest posteriors closer than max_gap.
bool in_boundary_strip(const GaussianMixture& mixture, const BoundaryStrip& strip,
                       double x, double y);

/// Rejection sampler over the support disk for boundary-strip points.
ad::Tensor boundary_strip_sampler(const GaussianMixture& mixture, std::size_t n,
                                  std::uint64_t seed,
                                  const BoundaryStrip& strip = {});

/// Uniform points within `radius` of each class mean, class-major order.
ad::Tensor class_core_sampler(const GaussianMixture& mixture,
                              std::size_t n_per_class, double radius,
                              std::uint64_t seed);

struct GridSpec {
  double x_min = -15.0;
  double x_max = 15.0;
  double y_min = -15.0;
  double y_max = 15.0;
  std::size_t x_res = 200;
  std::size_t y_res = 200;

  void validate() const;
  std::size_t point_count() const { return x_res * y_res; }
};

/// Grid points in scan order: x varies fastest, rows run from y_min upward.
ad::Tensor gen_grid(const GridSpec& spec);

}  // namespace evuq::data
