#include "evuq/losses/losses.hpp"

#include <stdexcept>

#include "evuq/autodiff/ops.hpp"
#include "evuq/sl/subjective_logic.hpp"

namespace evuq::losses {
namespace {

void check_one_hot(const ad::Tensor& y, const ad::Tensor& like) {
  if (!y.same_shape(like)) {
    throw ad::ShapeError("label matrix " + ad::to_string(y.shape()) +
                         " does not match " + ad::to_string(like.shape()));
  }
  for (std::size_t r = 0; r < y.rows(); ++r) {
    int ones = 0;
    for (std::size_t c = 0; c < y.cols(); ++c) {
      const Real v = y.at(r, c);
      if (v == Real{1}) {
        ++ones;
      } else if (v != Real{0}) {
        throw sl::DomainError("label row " + std::to_string(r) +
                              " is not one-hot");
      }
    }
    if (ones != 1) {
      throw sl::DomainError("label row " + std::to_string(r) + " is not one-hot");
    }
  }
}

}  // namespace

LossValue LossValue::of(ad::Var node) {
  return LossValue{node, static_cast<double>(node.value().item())};
}

ad::Tensor one_hot(std::span<const int> labels, std::size_t k) {
  ad::Tensor y = ad::Tensor::zeros(labels.size(), k);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k) {
      throw sl::DomainError("label out of range");
    }
    y.at(r, static_cast<std::size_t>(labels[r])) = Real{1};
  }
  return y;
}

LossValue enn_sq_loss(ad::Var alpha, const ad::Tensor& y) {
  check_one_hot(y, alpha.value());
  ad::Tape& tape = alpha.tape();
  const std::size_t n = y.rows();
  const std::size_t k = y.cols();
  ad::Var yv = tape.constant(y);
  ad::Var s = ad::expand_cols(ad::row_sum(alpha), k);
  ad::Var mean_p = ad::div(alpha, s);
  // y^2 - 2 y E[p] + E[p^2] rearranged as (y - E[p])^2 + Var[p], with
  // Var[p_j] = E[p_j] (1 - E[p_j]) / (S + 1). Same value, no cancellation
  // when the prediction is confident and correct.
  ad::Var variance = ad::div(ad::mul(mean_p, ad::add_scalar(ad::neg(mean_p), 1.0)),
                             ad::add_scalar(s, 1.0));
  ad::Var per_entry = ad::add(ad::square(ad::sub(yv, mean_p)), variance);
  return LossValue::of(ad::scale(ad::sum(per_entry), 1.0 / static_cast<double>(n)));
}

LossValue cross_entropy_loss(ad::Var probabilities, const ad::Tensor& y) {
  check_one_hot(y, probabilities.value());
  ad::Tape& tape = probabilities.tape();
  ad::Var p_true = ad::row_sum(ad::mul(probabilities, tape.constant(y)));
  return LossValue::of(ad::neg(ad::mean(ad::log(p_true))));
}

LossValue cross_entropy_from_logits(ad::Var logits, const ad::Tensor& y) {
  check_one_hot(y, logits.value());
  ad::Tape& tape = logits.tape();
  ad::Var z_true = ad::row_sum(ad::mul(logits, tape.constant(y)));
  return LossValue::of(ad::mean(ad::sub(ad::logsumexp_rows(logits), z_true)));
}

LossValue mean_vacuity(ad::Var alpha) {
  ad::Tape& tape = alpha.tape();
  const ad::Tensor& a = alpha.value();
  ad::Var s = ad::row_sum(alpha);
  ad::Var k = tape.constant(
      ad::Tensor::full(a.rows(), 1, static_cast<Real>(a.cols())));
  return LossValue::of(ad::mean(ad::div(k, s)));
}

LossValue regularized_enn_loss(ad::Var alpha_in, const ad::Tensor& y_in,
                               ad::Var alpha_out, double beta) {
  if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
  LossValue fit = enn_sq_loss(alpha_in, y_in);
  if (beta == 0.0) return fit;
  LossValue vac = mean_vacuity(alpha_out);
  return LossValue::of(ad::sub(fit.node, ad::scale(vac.node, beta)));
}

CriticFn bind_critic(ad::Tape& tape, const models::Discriminator& d,
                     bool trainable, std::vector<ad::Var>* bound) {
  auto params = d.bind(tape, trainable);
  if (bound) *bound = params;
  return [&d, params](ad::Var x) { return d.forward(params, x); };
}

LossValue gradient_penalty(ad::Tape& tape, const CriticFn& critic,
                           const ad::Tensor& x_real, const ad::Tensor& x_fake,
                           double lambda_gp, data::Rng& rng) {
  if (!x_real.same_shape(x_fake)) {
    throw ad::ShapeError("gradient penalty needs equal real and fake batches");
  }
  ad::Tensor mixed(x_real.shape());
  for (std::size_t r = 0; r < x_real.rows(); ++r) {
    const auto t = static_cast<Real>(rng.uniform());
    for (std::size_t c = 0; c < x_real.cols(); ++c) {
      mixed.at(r, c) = t * x_real.at(r, c) + (Real{1} - t) * x_fake.at(r, c);
    }
  }
  ad::Var x = tape.variable(std::move(mixed));
  // Rows are independent, so the gradient of the summed scores gives every
  // sample's own input gradient.
  ad::Var grad = tape.grad_as_node(ad::sum(critic(x)), x);
  ad::Var gap = ad::add_scalar(ad::l2_norm_rows(grad), -1.0);
  return LossValue::of(ad::scale(ad::mean(ad::square(gap)), lambda_gp));
}

std::string to_string(LipschitzMode mode) {
  return mode == LipschitzMode::kGradientPenalty ? "gp" : "clip";
}

LipschitzMode parse_lipschitz_mode(const std::string& s) {
  if (s == "gp") return LipschitzMode::kGradientPenalty;
  if (s == "clip") return LipschitzMode::kClip;
  throw std::invalid_argument("unknown lipschitz mode '" + s + "'");
}

LossValue critic_loss(ad::Tape& tape, const CriticFn& critic,
                      const ad::Tensor& x_real, const ad::Tensor& x_fake,
                      LipschitzMode mode, double lambda_gp, data::Rng& rng) {
  ad::Var real = tape.constant(x_real);
  ad::Var fake = tape.constant(x_fake);
  ad::Var gap = ad::sub(ad::mean(critic(fake)), ad::mean(critic(real)));
  if (mode == LipschitzMode::kClip) return LossValue::of(gap);
  LossValue penalty = gradient_penalty(tape, critic, x_real, x_fake, lambda_gp, rng);
  return LossValue::of(ad::add(gap, penalty.node));
}

double wasserstein_estimate(const models::Discriminator& d,
                            const ad::Tensor& x_real, const ad::Tensor& x_fake) {
  const ad::Tensor real = d.score(x_real);
  const ad::Tensor fake = d.score(x_fake);
  double mr = 0.0;
  double mf = 0.0;
  for (Real v : real.data()) mr += v;
  for (Real v : fake.data()) mf += v;
  return mr / static_cast<double>(real.size()) - mf / static_cast<double>(fake.size());
}

GeneratorLossParts generator_loss(ad::Tape& tape, const models::Generator& g,
                                  std::span<const ad::Var> gen_params,
                                  const models::Discriminator& d,
                                  const models::Classifier& f,
                                  const ad::Tensor& z, double beta) {
  if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
  GeneratorLossParts parts;
  CriticFn critic = bind_critic(tape, d, /*trainable=*/false, &parts.critic_params);
  parts.classifier_params = f.bind(tape, /*trainable=*/false);
  parts.generated = g.forward(gen_params, tape.constant(z));
  ad::Var objective = ad::mean(critic(parts.generated));
  LossValue vac = mean_vacuity(f.alpha(parts.classifier_params, parts.generated));
  parts.mean_vacuity = vac.value;
  if (beta > 0.0) objective = ad::add(objective, ad::scale(vac.node, beta));
  parts.total = LossValue::of(objective);
  return parts;
}

}  // namespace evuq::losses
