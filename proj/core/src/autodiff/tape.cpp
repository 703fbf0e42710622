#include "evuq/autodiff/tape.hpp"

#include <string>

#include "evuq/autodiff/ops.hpp"

namespace evuq::ad {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kNeg: return "neg";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kRelu: return "relu";
    case OpKind::kReluMask: return "relu_mask";
    case OpKind::kSign: return "sign";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSquare: return "square";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kRowSum: return "row_sum";
    case OpKind::kColSum: return "col_sum";
    case OpKind::kExpandScalar: return "expand_scalar";
    case OpKind::kExpandRows: return "expand_rows";
    case OpKind::kExpandCols: return "expand_cols";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kSliceCols: return "slice_cols";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kL2NormRows: return "l2_norm_rows";
    case OpKind::kLogSumExpRows: return "logsumexp_rows";
  }
  return "unknown";
}

Tape& Var::tape() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().node(id_).value; }

bool Var::requires_grad() const { return tape().node(id_).requires_grad; }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind op, Tensor value, std::initializer_list<Var> inputs,
                 NodeAttr attr, bool differentiable) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.attr = attr;
  std::size_t k = 0;
  bool any_grad = false;
  for (Var in : inputs) {
    check_owned(in, op_name(op));
    n.inputs[k++] = in.id();
    any_grad = any_grad || nodes_[in.id()].requires_grad;
  }
  n.requires_grad = recording_ && differentiable && any_grad;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v, const char* what) const {
  if (!v.valid() || v.tape_ != this || v.id() >= nodes_.size()) {
    throw ContractError(std::string(what) + ": operand belongs to another tape");
  }
}

std::vector<std::optional<Var>> Tape::propagate(Var output,
                                                std::span<const Var> wrt,
                                                bool create_graph) {
  check_owned(output, "backward");
  if (output.value().size() != 1) {
    throw ContractError("backward requires a scalar output, got shape " +
                        to_string(output.shape()));
  }
  const std::size_t last = output.id();

  // A node is relevant when it requires grad and lies on a path from one of
  // the requested inputs to the output.
  std::vector<char> relevant(last + 1, 0);
  for (Var w : wrt) {
    check_owned(w, "backward");
    if (w.id() <= last && nodes_[w.id()].requires_grad) relevant[w.id()] = 1;
  }
  for (std::size_t i = 0; i <= last; ++i) {
    const Node& n = nodes_[i];
    if (relevant[i] || !n.requires_grad) continue;
    for (const auto& in : n.inputs) {
      if (in && relevant[*in]) relevant[i] = 1;
    }
  }

  std::vector<std::optional<Var>> grads(last + 1);
  std::optional<NoGradGuard> no_grad;
  if (!create_graph) no_grad.emplace(*this);
  if (!relevant[last]) return grads;

  grads[last] = constant(Tensor(output.shape(), Real{1}));
  for (std::size_t i = last + 1; i-- > 0;) {
    if (!grads[i] || !relevant[i]) continue;
    const OpKind op = nodes_[i].op;
    if (op == OpKind::kLeaf) continue;
    const auto inputs = nodes_[i].inputs;
    std::array<bool, 2> need{};
    for (std::size_t k = 0; k < 2; ++k) {
      need[k] = inputs[k].has_value() && relevant[*inputs[k]];
    }
    auto in_grads = adjoint(*this, i, *grads[i], need);
    for (std::size_t k = 0; k < 2; ++k) {
      if (!need[k]) continue;
      if (!in_grads[k]) {
        throw ContractError(std::string("missing adjoint for input ") +
                            std::to_string(k) + " of " + op_name(op));
      }
      auto& slot = grads[*inputs[k]];
      slot = slot ? add(*slot, *in_grads[k]) : *in_grads[k];
    }
  }
  return grads;
}

std::vector<Tensor> Tape::backward(Var output, std::span<const Var> wrt) {
  auto grads = propagate(output, wrt, /*create_graph=*/false);
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (Var w : wrt) {
    if (w.id() < grads.size() && grads[w.id()]) {
      out.push_back(grads[w.id()]->value());
    } else {
      out.emplace_back(w.shape(), Real{0});
    }
  }
  return out;
}

Tensor Tape::backward(Var output, Var wrt) {
  const Var list[] = {wrt};
  return std::move(backward(output, list).front());
}

Var Tape::grad_as_node(Var output, Var wrt) {
  check_owned(wrt, "grad_as_node");
  if (!wrt.requires_grad()) {
    throw ContractError("grad_as_node: input is detached from the graph");
  }
  const Var list[] = {wrt};
  auto grads = propagate(output, list, /*create_graph=*/true);
  if (wrt.id() >= grads.size() || !grads[wrt.id()]) {
    throw ContractError(
        "grad_as_node: input does not participate in the output's graph");
  }
  return *grads[wrt.id()];
}

}  // namespace evuq::ad
