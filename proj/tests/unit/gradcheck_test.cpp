// Finite-difference checks of every differentiable primitive and loss.
// This file is compiled twice: against the 32-bit core and against the
// 64-bit core, with tolerances chosen by the Real type.
#include <gtest/gtest.h>

#include <string>
#include <type_traits>
#include <vector>

#include "evuq/autodiff/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/gradcheck_suite.hpp"

namespace evuq {
namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;
using testing::GradcheckOptions;

constexpr bool kWide = std::is_same_v<Real, double>;
const GradcheckOptions kOpts{kWide ? 1e-6 : 2e-2, 1e-2};
const double kTol = kWide ? 1e-6 : 1e-3;

void check_group(const std::string& group) {
  std::size_t ran = 0;
  for (const auto& c : testing::gradcheck_cases()) {
    if (c.group != group) continue;
    ++ran;
    SCOPED_TRACE(c.label);
    const auto r = testing::gradcheck(c.fn, c.inputs, kOpts);
    EXPECT_GT(r.checked, 0u);
    EXPECT_LE(r.skipped * 10, r.checked) << "too many kink crossings";
    // The 64-bit build is checked entry by entry; the 32-bit build on the
    // whole gradient vector.
    if constexpr (kWide) {
      EXPECT_LT(r.max_rel_error, kTol) << r.worst;
    } else {
      EXPECT_LT(r.norm_rel_error, kTol) << "worst entry " << r.worst;
    }
  }
  EXPECT_GT(ran, 0u) << "no cases in group " << group;
}

TEST(Gradcheck, Elementwise) { check_group("elementwise"); }
TEST(Gradcheck, Binary) { check_group("binary"); }
TEST(Gradcheck, MatMulAllTransposes) { check_group("matmul"); }
TEST(Gradcheck, Reshaping) { check_group("reshaping"); }
TEST(Gradcheck, SecondOrderThroughInputGradient) { check_group("second_order"); }
TEST(Gradcheck, EvidentialLossesOnSmallNets) { check_group("evidential"); }
TEST(Gradcheck, SoftmaxCrossEntropy) { check_group("softmax"); }
TEST(Gradcheck, CriticLossWithGradientPenalty) { check_group("critic"); }
TEST(Gradcheck, GeneratorObjective) { check_group("generator"); }

TEST(Gradcheck, PiecewiseConstantOpsCarryNoGradient) {
  Tape tape;
  Var x = tape.variable(Tensor::matrix(1, 3, {-1.0f, 0.5f, 2.0f}));
  Var y = ad::add(ad::mul(ad::relu_mask(x), x), ad::sign(x));
  Tensor g = tape.backward(ad::sum(y), x);
  EXPECT_EQ(g[0], Real{0});
  EXPECT_EQ(g[1], Real{1});
  EXPECT_EQ(g[2], Real{1});
}

}  // namespace
}  // namespace evuq
