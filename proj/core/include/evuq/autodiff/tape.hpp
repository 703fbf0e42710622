// Define-by-run reverse-mode tape.
//
// Every operation on a Var appends a node holding its forward value. The
// backward pass walks node indices in strictly decreasing order. Adjoint
// rules are themselves written with tape operations, so running backward
// with create_graph yields gradient nodes that can be differentiated again.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "evuq/autodiff/tensor.hpp"

namespace evuq::ad {

class Tape;

/// Misuse of the differentiation API (non-scalar output, detached input,
/// missing adjoint).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kScale,
  kAddScalar,
  kRelu,
  kReluMask,
  kSign,
  kSigmoid,
  kSoftplus,
  kExp,
  kLog,
  kSquare,
  kSqrt,
  kSum,
  kMean,
  kRowSum,
  kColSum,
  kExpandScalar,
  kExpandRows,
  kExpandCols,
  kConcatRows,
  kConcatCols,
  kSliceRows,
  kSliceCols,
  kTranspose,
  kL2NormRows,
  kLogSumExpRows,
};

const char* op_name(OpKind op);

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  std::size_t id() const { return id_; }
  Tape& tape() const;
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct NodeAttr {
  double scalar = 0.0;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool trans_a = false;
  bool trans_b = false;
};

struct Node {
  OpKind op = OpKind::kLeaf;
  std::array<std::optional<std::size_t>, 2> inputs{};
  Tensor value;
  bool requires_grad = false;
  NodeAttr attr;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives gradients.
  Var constant(Tensor value);
  /// Leaf that gradients are taken with respect to.
  Var variable(Tensor value);

  /// Gradients of a scalar output with respect to each entry of `wrt`.
  /// Inputs the output does not depend on get zero gradients.
  std::vector<Tensor> backward(Var output, std::span<const Var> wrt);
  Tensor backward(Var output, Var wrt);

  /// d output / d wrt as a differentiable node on this tape.
  Var grad_as_node(Var output, Var wrt);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  bool recording() const { return recording_; }

  /// Appends a node; used by the operation implementations.
  Var record(OpKind op, Tensor value, std::initializer_list<Var> inputs,
             NodeAttr attr = {}, bool differentiable = true);
  Var handle(std::size_t id) { return Var(this, id); }

  /// Disables graph recording for its lifetime.
  class NoGradGuard {
   public:
    explicit NoGradGuard(Tape& tape) : tape_(tape), saved_(tape.recording_) {
      tape_.recording_ = false;
    }
    ~NoGradGuard() { tape_.recording_ = saved_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    Tape& tape_;
    bool saved_;
  };

 private:
  std::vector<std::optional<Var>> propagate(Var output,
                                            std::span<const Var> wrt,
                                            bool create_graph);
  void check_owned(Var v, const char* what) const;

  std::deque<Node> nodes_;
  bool recording_ = true;
};

}  // namespace evuq::ad
