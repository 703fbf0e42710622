#include "evuq/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evuq::data {

void Dataset::validate() const {
  if (features.rank() != 2 || features.rows() == 0) {
    throw std::invalid_argument("dataset must have at least one row");
  }
  if (!features.all_finite()) {
    throw std::invalid_argument("dataset features must be finite");
  }
  if (!labels.empty()) {
    if (labels.size() != features.rows()) {
      throw std::invalid_argument("label count differs from row count");
    }
    for (int y : labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
        throw std::invalid_argument("label out of range");
      }
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.description = description;
  out.seed = seed;
  out.features = ad::Tensor(ad::Shape{indices.size(), dim()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    for (std::size_t c = 0; c < dim(); ++c) {
      out.features.at(i, c) = features.at(indices[i], c);
    }
    if (labeled()) out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

GaussianMixture GaussianMixture::synthetic() {
  const double s3 = std::sqrt(3.0);
  return GaussianMixture{{{0.0, 4.0}, {-2.0 * s3, -2.0}, {2.0 * s3, -2.0}}, 4.0};
}

std::vector<double> GaussianMixture::posterior(double x, double y) const {
  std::vector<double> logp(means.size());
  for (std::size_t k = 0; k < means.size(); ++k) {
    const double dx = x - means[k][0];
    const double dy = y - means[k][1];
    logp[k] = -(dx * dx + dy * dy) / (2.0 * variance);
  }
  const double hi = *std::max_element(logp.begin(), logp.end());
  double total = 0.0;
  for (double& v : logp) {
    v = std::exp(v - hi);
    total += v;
  }
  for (double& v : logp) v /= total;
  return logp;
}

Dataset gen_gaussian_mixture(std::size_t n_per_class, std::uint64_t seed,
                             const GaussianMixture& mixture) {
  if (n_per_class == 0) {
    throw std::invalid_argument("n_per_class must be at least 1");
  }
  Rng rng(seed, "data.mixture");
  const std::size_t k = mixture.means.size();
  const double sd = std::sqrt(mixture.variance);
  Dataset d;
  d.num_classes = k;
  d.seed = seed;
  d.description = "gaussian-mixture k=" + std::to_string(k) +
                  " variance=" + std::to_string(mixture.variance);
  d.features = ad::Tensor(ad::Shape{n_per_class * k, 2});
  std::size_t row = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      d.features.at(row, 0) = static_cast<Real>(mixture.means[c][0] + sd * rng.normal());
      d.features.at(row, 1) = static_cast<Real>(mixture.means[c][1] + sd * rng.normal());
      d.labels.push_back(static_cast<int>(c));
    }
  }
  return d;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& data,
                                             double train_fraction,
                                             std::uint64_t seed) {
  if (!data.labeled()) throw std::invalid_argument("split needs labels");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
  Rng rng(seed, "data.split");
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t c = 0; c < data.num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.labels[i] == static_cast<int>(c)) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng.engine());
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(members.size())));
    train_idx.insert(train_idx.end(), members.begin(),
                     members.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_idx.insert(test_idx.end(),
                    members.begin() + static_cast<std::ptrdiff_t>(n_train),
                    members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {data.subset(train_idx), data.subset(test_idx)};
}

ad::Tensor gen_uniform_ood(std::size_t n, const OodBox& box,
                           std::uint64_t seed) {
  const double corner = std::max(std::abs(box.lo), std::abs(box.hi));
  if (!(box.lo < box.hi) || box.min_radius < 0.0 ||
      box.min_radius >= std::sqrt(2.0) * corner) {
    throw std::invalid_argument("degenerate OOD box");
  }
  Rng rng(seed, "data.ood");
  ad::Tensor out(ad::Shape{n, 2});
  const double r2 = box.min_radius * box.min_radius;
  for (std::size_t i = 0; i < n;) {
    const double x = rng.uniform(box.lo, box.hi);
    const double y = rng.uniform(box.lo, box.hi);
    // The stored float must satisfy the radius contract too.
    const auto fx = static_cast<Real>(x);
    const auto fy = static_cast<Real>(y);
    if (static_cast<double>(fx) * fx + static_cast<double>(fy) * fy < r2) continue;
    out.at(i, 0) = fx;
    out.at(i, 1) = fy;
    ++i;
  }
  return out;
}

bool in_boundary_strip(const GaussianMixture& mixture, const BoundaryStrip& strip,
                       double x, double y) {
  if (x * x + y * y > strip.support_radius * strip.support_radius) return false;
  auto post = mixture.posterior(x, y);
  std::partial_sort(post.begin(), post.begin() + 2, post.end(), std::greater<>());
  return post[0] - post[1] < strip.max_gap;
}

ad::Tensor boundary_strip_sampler(const GaussianMixture& mixture, std::size_t n,
                                  std::uint64_t seed,
                                  const BoundaryStrip& strip) {
  Rng rng(seed, "data.boundary");
  ad::Tensor out(ad::Shape{n, 2});
  const double r = strip.support_radius;
  std::size_t attempts = 0;
  for (std::size_t i = 0; i < n;) {
    if (++attempts > strip.max_attempts) {
      throw SamplerError("boundary strip sampler gave up after " +
                         std::to_string(strip.max_attempts) + " attempts");
    }
    const auto x = static_cast<Real>(rng.uniform(-r, r));
    const auto y = static_cast<Real>(rng.uniform(-r, r));
    if (!in_boundary_strip(mixture, strip, x, y)) continue;
    out.at(i, 0) = x;
    out.at(i, 1) = y;
    ++i;
  }
  return out;
}

ad::Tensor class_core_sampler(const GaussianMixture& mixture,
                              std::size_t n_per_class, double radius,
                              std::uint64_t seed) {
  Rng rng(seed, "data.core");
  ad::Tensor out(ad::Shape{n_per_class * mixture.means.size(), 2});
  std::size_t row = 0;
  for (const auto& m : mixture.means) {
    for (std::size_t i = 0; i < n_per_class;) {
      const double dx = rng.uniform(-radius, radius);
      const double dy = rng.uniform(-radius, radius);
      if (dx * dx + dy * dy > radius * radius) continue;
      out.at(row, 0) = static_cast<Real>(m[0] + dx);
      out.at(row, 1) = static_cast<Real>(m[1] + dy);
      ++row;
      ++i;
    }
  }
  return out;
}

void GridSpec::validate() const {
  if (!(x_min < x_max) || !(y_min < y_max)) {
    throw std::invalid_argument("grid ranges must satisfy min < max");
  }
  if (x_res < 2 || y_res < 2) {
    throw std::invalid_argument("grid resolution must be at least 2");
  }
}

ad::Tensor gen_grid(const GridSpec& spec) {
  spec.validate();
  ad::Tensor out(ad::Shape{spec.point_count(), 2});
  const double dx = (spec.x_max - spec.x_min) / static_cast<double>(spec.x_res - 1);
  const double dy = (spec.y_max - spec.y_min) / static_cast<double>(spec.y_res - 1);
  std::size_t row = 0;
  for (std::size_t iy = 0; iy < spec.y_res; ++iy) {
    for (std::size_t ix = 0; ix < spec.x_res; ++ix, ++row) {
      out.at(row, 0) = static_cast<Real>(spec.x_min + dx * static_cast<double>(ix));
      out.at(row, 1) = static_cast<Real>(spec.y_min + dy * static_cast<double>(iy));
    }
  }
  return out;
}

}  // namespace evuq::data
