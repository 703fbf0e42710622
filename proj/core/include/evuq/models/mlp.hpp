#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "evuq/autodiff/optim.hpp"
#include "evuq/autodiff/tape.hpp"
#include "evuq/data/rng.hpp"

namespace evuq::models {

enum class HeadKind { kEvidence, kSoftmax, kLinear };
enum class EvidenceActivation { kRelu, kSoftplus };

std::string to_string(HeadKind head);
std::string to_string(EvidenceActivation act);
HeadKind parse_head(const std::string& s);
EvidenceActivation parse_activation(const std::string& s);

/// Fully connected network description with relu hidden layers.
struct MlpSpec {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden{500, 500};
  std::size_t output_dim = 3;
  HeadKind head = HeadKind::kEvidence;
  EvidenceActivation activation = EvidenceActivation::kRelu;

  void validate() const;
  /// Single-line `key=value` description, parseable by parse_spec.
  std::string describe() const;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

MlpSpec parse_spec(const std::string& text);

/// Parameter storage and the affine/relu stack shared by every network.
/// Layer i holds `layer{i}.weight` [in x out] and `layer{i}.bias` [1 x out].
class Mlp {
 public:
  explicit Mlp(MlpSpec spec);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  Mlp(MlpSpec spec, data::Rng& rng);

  const MlpSpec& spec() const { return spec_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  std::vector<ad::Var> bind(ad::Tape& tape, bool trainable) const {
    return params_.bind(tape, trainable);
  }
  /// Pre-head output for a batch x [n x input_dim].
  ad::Var apply(std::span<const ad::Var> bound, ad::Var x) const;

  /// Multiplies the last layer's weight and bias by k.
  void scale_output_layer(double k);

 private:
  MlpSpec spec_;
  ad::ParameterSet params_;
};

}  // namespace evuq::models
