// Classifier f(x | Theta), generator G(z | theta) and critic D(x | omega).
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "evuq/models/mlp.hpp"
#include "evuq/sl/subjective_logic.hpp"

namespace evuq::models {

/// Row block for batched inference. The matmul kernel rounds a row
/// differently depending on its offset inside a block, so callers that split
/// work and want bitwise-stable results should split on multiples of this.
inline constexpr std::size_t kInferenceChunkRows = 4096;

/// Evidential (alpha = act(logits) + 1) or softmax classifier.
class Classifier {
 public:
  explicit Classifier(MlpSpec spec);
  Classifier(MlpSpec spec, data::Rng& rng);

  const MlpSpec& spec() const { return net_.spec(); }
  bool evidential() const { return spec().head == HeadKind::kEvidence; }
  std::size_t num_classes() const { return spec().output_dim; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  ad::ParameterSet& params() { return net_.params(); }
  const ad::ParameterSet& params() const { return net_.params(); }

  std::vector<ad::Var> bind(ad::Tape& tape, bool trainable) const {
    return net_.bind(tape, trainable);
  }
  ad::Var logits(std::span<const ad::Var> bound, ad::Var x) const;
  /// Dirichlet parameters; evidence heads only.
  ad::Var alpha(std::span<const ad::Var> bound, ad::Var x) const;
  /// Class probabilities: softmax for softmax heads, alpha / S otherwise.
  ad::Var probabilities(std::span<const ad::Var> bound, ad::Var x) const;

  /// Inference without gradients, in chunks of kInferenceChunkRows rows.
  ad::Tensor predict_alpha(const ad::Tensor& x) const;
  ad::Tensor predict_probabilities(const ad::Tensor& x) const;
  std::vector<int> predict_labels(const ad::Tensor& x) const;

 private:
  void check_evidential() const;
  Mlp net_;
};

/// Per-sample output of a classifier forward pass.
struct ClassifierOutput {
  HeadKind head = HeadKind::kEvidence;
  /// Dirichlet parameters (evidence heads); empty otherwise.
  std::vector<sl::DirichletParams> alphas;
  /// Class probabilities, [n x K], for every head.
  ad::Tensor probabilities;
};

ClassifierOutput classifier_forward(const Classifier& c, const ad::Tensor& x);

enum class LatentPrior { kGaussian, kUniform };

class Generator {
 public:
  Generator(MlpSpec spec, LatentPrior prior);
  Generator(MlpSpec spec, LatentPrior prior, data::Rng& rng);

  const MlpSpec& spec() const { return net_.spec(); }
  std::size_t latent_dim() const { return spec().input_dim; }
  std::size_t output_dim() const { return spec().output_dim; }
  LatentPrior prior() const { return prior_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  ad::ParameterSet& params() { return net_.params(); }
  const ad::ParameterSet& params() const { return net_.params(); }

  std::vector<ad::Var> bind(ad::Tape& tape, bool trainable) const {
    return net_.bind(tape, trainable);
  }
  ad::Var forward(std::span<const ad::Var> bound, ad::Var z) const {
    return net_.apply(bound, z);
  }
  /// m latent draws: N(0, I) or Uniform(-1, 1) per coordinate.
  ad::Tensor sample_latent(std::size_t m, data::Rng& rng) const;
  ad::Tensor generate(const ad::Tensor& z) const;

 private:
  Mlp net_;
  LatentPrior prior_;
};

/// Unconstrained scalar critic.
class Discriminator {
 public:
  explicit Discriminator(MlpSpec spec);
  Discriminator(MlpSpec spec, data::Rng& rng);

  const MlpSpec& spec() const { return net_.spec(); }
  ad::ParameterSet& params() { return net_.params(); }
  const ad::ParameterSet& params() const { return net_.params(); }

  std::vector<ad::Var> bind(ad::Tape& tape, bool trainable) const {
    return net_.bind(tape, trainable);
  }
  /// [n x L] -> [n x 1].
  ad::Var forward(std::span<const ad::Var> bound, ad::Var x) const {
    return net_.apply(bound, x);
  }
  ad::Tensor score(const ad::Tensor& x) const;

 private:
  Mlp net_;
};

std::string to_string(LatentPrior prior);
LatentPrior parse_prior(const std::string& s);

}  // namespace evuq::models
