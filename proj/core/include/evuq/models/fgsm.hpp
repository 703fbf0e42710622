#pragma once

#include <span>

#include "evuq/models/networks.hpp"

namespace evuq::models {

/// Input gradient of the classifier's own training loss (expected squared
/// error for evidence heads, cross-entropy for softmax heads).
ad::Tensor loss_input_gradient(const Classifier& c, const ad::Tensor& x,
                               std::span<const int> labels);

/// x + epsilon * sign(grad_x loss). Requires epsilon >= 0.
ad::Tensor fgsm_perturb(const Classifier& c, const ad::Tensor& x,
                        std::span<const int> labels, double epsilon);

}  // namespace evuq::models
