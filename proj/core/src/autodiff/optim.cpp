#include "evuq/autodiff/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace evuq::ad {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

void ParameterSet::add(std::string name, Tensor value) {
  params_.push_back(Parameter{std::move(name), std::move(value)});
}

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::vector<Var> ParameterSet::bind(Tape& tape, bool trainable) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (const auto& p : params_) {
    vars.push_back(trainable ? tape.variable(p.value) : tape.constant(p.value));
  }
  return vars;
}

std::uint64_t ParameterSet::digest() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : params_) {
    fnv_mix(h, p.name.data(), p.name.size());
    for (std::size_t d : p.value.shape()) fnv_mix(h, &d, sizeof d);
    fnv_mix(h, p.value.raw(), p.value.size() * sizeof(Real));
  }
  return h;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || !(a[i].value == b[i].value)) return false;
  }
  return true;
}

TrainingError::TrainingError(std::string phase, std::int64_t iteration,
                             const std::string& what)
    : std::runtime_error(phase + " phase, iteration " +
                         std::to_string(iteration) + ": " + what),
      phase_(std::move(phase)),
      iteration_(iteration) {}

AdamState AdamState::zeros_like(const ParameterSet& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.shape(), Real{0});
    s.v.emplace_back(p.value.shape(), Real{0});
  }
  return s;
}

void adam_step(ParameterSet& params, std::span<const Tensor> grads,
               AdamState& state, std::int64_t iteration,
               std::string_view phase) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(params[i].value) ||
        !state.m[i].same_shape(params[i].value)) {
      throw ShapeError("adam_step: shape mismatch for " + params[i].name);
    }
    if (!grads[i].all_finite()) {
      throw TrainingError(std::string(phase), iteration,
                          "non-finite gradient for " + params[i].name);
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const Real b1 = static_cast<Real>(c.beta1);
  const Real b2 = static_cast<Real>(c.beta2);
  const Real corr1 = static_cast<Real>(1.0 / (1.0 - std::pow(c.beta1, t)));
  const Real corr2 = static_cast<Real>(1.0 / (1.0 - std::pow(c.beta2, t)));
  const Real lr = static_cast<Real>(c.lr);
  const Real eps = static_cast<Real>(c.eps);
  const Real wd = static_cast<Real>(c.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Real* w = params[i].value.raw();
    const Real* g = grads[i].raw();
    Real* m = state.m[i].raw();
    Real* v = state.v[i].raw();
    for (std::size_t j = 0, n = params[i].value.size(); j < n; ++j) {
      const Real gj = g[j] + wd * w[j];
      m[j] = b1 * m[j] + (Real{1} - b1) * gj;
      v[j] = b2 * v[j] + (Real{1} - b2) * gj * gj;
      const Real m_hat = m[j] * corr1;
      const Real v_hat = v[j] * corr2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

void clip_weights(ParameterSet& params, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("clip_weights: c must be > 0");
  const Real lim = static_cast<Real>(c);
  for (auto& p : params) {
    for (Real& w : p.value.data()) w = std::clamp(w, -lim, lim);
  }
}

}  // namespace evuq::ad
