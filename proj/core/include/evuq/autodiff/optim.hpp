#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evuq/autodiff/tape.hpp"
#include "evuq/autodiff/tensor.hpp"

namespace evuq::ad {

struct Parameter {
  std::string name;
  Tensor value;
};

/// Ordered named parameters of one network.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t element_count() const;

  /// Leaves for every parameter. Frozen bindings are constants, so no
  /// gradient can reach them.
  std::vector<Var> bind(Tape& tape, bool trainable) const;

  /// FNV-1a digest of names, shapes and raw bytes.
  std::uint64_t digest() const;

  friend bool operator==(const ParameterSet&, const ParameterSet&);

 private:
  std::vector<Parameter> params_;
};

/// Non-finite values met during training.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::string phase, std::int64_t iteration,
                const std::string& what);
  const std::string& phase() const { return phase_; }
  std::int64_t iteration() const { return iteration_; }

 private:
  std::string phase_;
  std::int64_t iteration_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Coupled L2 decay added to the gradient (0 disables).
  double weight_decay = 0.0;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;

  static AdamState zeros_like(const ParameterSet& params, AdamConfig config);
};

/// One bias-corrected Adam descent step. Throws TrainingError carrying
/// `iteration` and `phase` if any gradient is not finite.
void adam_step(ParameterSet& params, std::span<const Tensor> grads,
               AdamState& state, std::int64_t iteration = 0,
               std::string_view phase = "train");

/// Clamp every parameter entry to [-c, c].
void clip_weights(ParameterSet& params, double c);

}  // namespace evuq::ad
