#include "evuq/models/fgsm.hpp"

#include <stdexcept>

#include "evuq/losses/losses.hpp"

namespace evuq::models {

ad::Tensor loss_input_gradient(const Classifier& c, const ad::Tensor& x,
                               std::span<const int> labels) {
  if (labels.size() != x.rows()) {
    throw std::invalid_argument("fgsm: label count differs from row count");
  }
  ad::Tape tape;
  auto params = c.bind(tape, /*trainable=*/false);
  ad::Var xin = tape.variable(x);
  const ad::Tensor y = losses::one_hot(labels, c.num_classes());
  const losses::LossValue loss =
      c.evidential() ? losses::enn_sq_loss(c.alpha(params, xin), y)
                     : losses::cross_entropy_from_logits(c.logits(params, xin), y);
  return tape.backward(loss.node, xin);
}

ad::Tensor fgsm_perturb(const Classifier& c, const ad::Tensor& x,
                        std::span<const int> labels, double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("fgsm: epsilon must be >= 0");
  if (epsilon == 0.0) return x;
  const ad::Tensor grad = loss_input_gradient(c, x, labels);
  ad::Tensor out = x;
  const auto eps = static_cast<Real>(epsilon);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Real g = grad[i];
    if (g > Real{0}) {
      out[i] += eps;
    } else if (g < Real{0}) {
      out[i] -= eps;
    }
  }
  return out;
}

}  // namespace evuq::models
