// Differentiable objectives for evidential classification and the
// vacuity-regularized Wasserstein GAN. Every batch reduction is a mean.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "evuq/autodiff/tape.hpp"
#include "evuq/data/rng.hpp"
#include "evuq/models/networks.hpp"

namespace evuq::losses {

/// A scalar loss node together with its value at creation.
struct LossValue {
  ad::Var node;
  double value = 0.0;

  static LossValue of(ad::Var node);
};

/// One-hot [n x k] matrix for integer labels.
ad::Tensor one_hot(std::span<const int> labels, std::size_t k);

/// Expected squared error of a one-hot label under Dir(alpha):
/// mean over the batch of sum_j (y_j^2 - 2 y_j E[p_j] + E[p_j^2]).
/// Throws sl::DomainError when y is not one-hot.
LossValue enn_sq_loss(ad::Var alpha, const ad::Tensor& y);

/// Mean of -log p_true for probability rows.
LossValue cross_entropy_loss(ad::Var probabilities, const ad::Tensor& y);
/// Mean of logsumexp(z) - z_true, for softmax logits.
LossValue cross_entropy_from_logits(ad::Var logits, const ad::Tensor& y);

/// Mean of K / S over the batch.
LossValue mean_vacuity(ad::Var alpha);

/// enn_sq_loss(alpha_in, y_in) - beta * mean_vacuity(alpha_out).
LossValue regularized_enn_loss(ad::Var alpha_in, const ad::Tensor& y_in,
                               ad::Var alpha_out, double beta);

/// Maps an input batch node to [n x 1] critic scores on the same tape.
using CriticFn = std::function<ad::Var(ad::Var)>;

/// Binds a discriminator's parameters (trainable or frozen) on `tape`.
CriticFn bind_critic(ad::Tape& tape, const models::Discriminator& d,
                     bool trainable, std::vector<ad::Var>* bound = nullptr);

/// lambda * mean (||grad_x D(x_t)|| - 1)^2 on interpolates
/// x_t = t x_real + (1 - t) x_fake, one t ~ U(0, 1) per row. The input
/// gradient is a graph node, so the result is differentiable in the critic
/// parameters.
LossValue gradient_penalty(ad::Tape& tape, const CriticFn& critic,
                           const ad::Tensor& x_real, const ad::Tensor& x_fake,
                           double lambda_gp, data::Rng& rng);

enum class LipschitzMode { kGradientPenalty, kClip };
std::string to_string(LipschitzMode mode);
LipschitzMode parse_lipschitz_mode(const std::string& s);

/// mean D(fake) - mean D(real), plus the gradient penalty in gp mode. In
/// clip mode the caller clips weights after the optimizer step.
LossValue critic_loss(ad::Tape& tape, const CriticFn& critic,
                      const ad::Tensor& x_real, const ad::Tensor& x_fake,
                      LipschitzMode mode, double lambda_gp, data::Rng& rng);

/// mean D(real) - mean D(fake), detached.
double wasserstein_estimate(const models::Discriminator& d,
                            const ad::Tensor& x_real, const ad::Tensor& x_fake);

/// Generator objective to ascend: mean D(G(z)) + beta * mean Vac(f(G(z))).
/// Critic and classifier are bound frozen, so only generator parameters in
/// `gen_params` can receive gradient.
struct GeneratorLossParts {
  LossValue total;
  ad::Var generated;
  std::vector<ad::Var> critic_params;
  std::vector<ad::Var> classifier_params;
  double mean_vacuity = 0.0;
};

GeneratorLossParts generator_loss(ad::Tape& tape, const models::Generator& g,
                                  std::span<const ad::Var> gen_params,
                                  const models::Discriminator& d,
                                  const models::Classifier& f,
                                  const ad::Tensor& z, double beta);

}  // namespace evuq::losses
