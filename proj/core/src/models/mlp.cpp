#include "evuq/models/mlp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "evuq/autodiff/ops.hpp"

namespace evuq::models {

std::string to_string(HeadKind head) {
  switch (head) {
    case HeadKind::kEvidence: return "evidence";
    case HeadKind::kSoftmax: return "softmax";
    case HeadKind::kLinear: return "linear";
  }
  return "?";
}

std::string to_string(EvidenceActivation act) {
  return act == EvidenceActivation::kRelu ? "relu" : "softplus";
}

HeadKind parse_head(const std::string& s) {
  if (s == "evidence") return HeadKind::kEvidence;
  if (s == "softmax") return HeadKind::kSoftmax;
  if (s == "linear") return HeadKind::kLinear;
  throw std::invalid_argument("unknown head kind '" + s + "'");
}

EvidenceActivation parse_activation(const std::string& s) {
  if (s == "relu") return EvidenceActivation::kRelu;
  if (s == "softplus") return EvidenceActivation::kSoftplus;
  throw std::invalid_argument("unknown evidence activation '" + s + "'");
}

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) {
    throw std::invalid_argument("MLP dimensions must be positive");
  }
  if (hidden.empty()) throw std::invalid_argument("MLP needs a hidden layer");
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("hidden width must be positive");
  }
  if (head != HeadKind::kLinear && output_dim < 2) {
    throw std::invalid_argument("classifier heads need at least two classes");
  }
}

std::string MlpSpec::describe() const {
  std::ostringstream out;
  out << "input=" << input_dim << " hidden=";
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i) out << ',';
    out << hidden[i];
  }
  out << " output=" << output_dim << " head=" << to_string(head)
      << " activation=" << to_string(activation);
  return out.str();
}

MlpSpec parse_spec(const std::string& text) {
  MlpSpec spec;
  spec.hidden.clear();
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("bad spec token '" + token + "'");
    }
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "input") {
      spec.input_dim = std::stoul(value);
    } else if (key == "output") {
      spec.output_dim = std::stoul(value);
    } else if (key == "hidden") {
      std::istringstream widths(value);
      std::string w;
      while (std::getline(widths, w, ',')) spec.hidden.push_back(std::stoul(w));
    } else if (key == "head") {
      spec.head = parse_head(value);
    } else if (key == "activation") {
      spec.activation = parse_activation(value);
    } else {
      throw std::invalid_argument("unknown spec key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t in = spec_.input_dim;
  std::vector<std::size_t> widths = spec_.hidden;
  widths.push_back(spec_.output_dim);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    params_.add("layer" + std::to_string(i) + ".weight",
                ad::Tensor::zeros(in, widths[i]));
    params_.add("layer" + std::to_string(i) + ".bias",
                ad::Tensor::zeros(1, widths[i]));
    in = widths[i];
  }
}

Mlp::Mlp(MlpSpec spec, data::Rng& rng) : Mlp(std::move(spec)) {
  for (std::size_t i = 0; i < params_.size(); i += 2) {
    const double fan_in = static_cast<double>(params_[i].value.rows());
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Real& w : params_[i].value.data()) w = static_cast<Real>(rng.uniform(-bound, bound));
    for (Real& b : params_[i + 1].value.data()) b = static_cast<Real>(rng.uniform(-bound, bound));
  }
}

ad::Var Mlp::apply(std::span<const ad::Var> bound, ad::Var x) const {
  if (bound.size() != params_.size()) {
    throw std::invalid_argument("bound parameter count differs from the MLP's");
  }
  if (x.value().rank() != 2 || x.value().cols() != spec_.input_dim) {
    throw ad::ShapeError("MLP input must be [n x " +
                         std::to_string(spec_.input_dim) + "], got " +
                         ad::to_string(x.shape()));
  }
  ad::Var h = x;
  const std::size_t layers = bound.size() / 2;
  for (std::size_t i = 0; i < layers; ++i) {
    h = ad::add(ad::matmul(h, bound[2 * i]), bound[2 * i + 1]);
    if (i + 1 < layers) h = ad::relu(h);
  }
  return h;
}

void Mlp::scale_output_layer(double k) {
  const auto rk = static_cast<Real>(k);
  for (std::size_t i = params_.size() - 2; i < params_.size(); ++i) {
    for (Real& v : params_[i].value.data()) v *= rk;
  }
}

}  // namespace evuq::models
