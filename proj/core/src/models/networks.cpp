#include "evuq/models/networks.hpp"

#include <algorithm>
#include <stdexcept>

#include "evuq/autodiff/ops.hpp"

namespace evuq::models {
namespace {

MlpSpec checked(MlpSpec spec, HeadKind a, HeadKind b, const char* what) {
  if (spec.head != a && spec.head != b) {
    throw std::invalid_argument(std::string(what) + ": unsupported head " +
                                to_string(spec.head));
  }
  return spec;
}

// Runs `fn(bound, x_chunk)` over row chunks with recording disabled and
// stacks the results.
template <typename Fn>
ad::Tensor chunked_inference(const Mlp& net, const ad::Tensor& x, Fn fn) {
  ad::Tensor out;
  std::vector<Real> data;
  std::size_t cols = 0;
  for (std::size_t begin = 0; begin < x.rows(); begin += kInferenceChunkRows) {
    const std::size_t end = std::min(x.rows(), begin + kInferenceChunkRows);
    ad::Tape tape;
    ad::Tape::NoGradGuard no_grad(tape);
    auto bound = net.bind(tape, false);
    ad::Var xin = tape.constant(x.rows_slice(begin, end));
    const ad::Tensor& y = fn(std::span<const ad::Var>(bound), xin).value();
    cols = y.cols();
    data.insert(data.end(), y.data().begin(), y.data().end());
  }
  return ad::Tensor(ad::Shape{x.rows(), cols}, std::move(data));
}

}  // namespace

Classifier::Classifier(MlpSpec spec)
    : net_(checked(std::move(spec), HeadKind::kEvidence, HeadKind::kSoftmax,
                   "classifier")) {}

Classifier::Classifier(MlpSpec spec, data::Rng& rng)
    : net_(checked(std::move(spec), HeadKind::kEvidence, HeadKind::kSoftmax,
                   "classifier"),
           rng) {}

void Classifier::check_evidential() const {
  if (!evidential()) {
    throw std::logic_error("Dirichlet output requested from a softmax classifier");
  }
}

ad::Var Classifier::logits(std::span<const ad::Var> bound, ad::Var x) const {
  return net_.apply(bound, x);
}

ad::Var Classifier::alpha(std::span<const ad::Var> bound, ad::Var x) const {
  check_evidential();
  ad::Var z = logits(bound, x);
  ad::Var evidence = spec().activation == EvidenceActivation::kRelu
                         ? ad::relu(z)
                         : ad::softplus(z);
  return ad::add_scalar(evidence, 1.0);
}

ad::Var Classifier::probabilities(std::span<const ad::Var> bound,
                                  ad::Var x) const {
  const std::size_t k = num_classes();
  if (evidential()) {
    ad::Var a = alpha(bound, x);
    return ad::div(a, ad::expand_cols(ad::row_sum(a), k));
  }
  ad::Var z = logits(bound, x);
  return ad::exp(ad::sub(z, ad::expand_cols(ad::logsumexp_rows(z), k)));
}

ad::Tensor Classifier::predict_alpha(const ad::Tensor& x) const {
  check_evidential();
  return chunked_inference(net_, x, [this](std::span<const ad::Var> b, ad::Var in) {
    return alpha(b, in);
  });
}

ad::Tensor Classifier::predict_probabilities(const ad::Tensor& x) const {
  return chunked_inference(net_, x, [this](std::span<const ad::Var> b, ad::Var in) {
    return probabilities(b, in);
  });
}

std::vector<int> Classifier::predict_labels(const ad::Tensor& x) const {
  const ad::Tensor p = predict_probabilities(x);
  std::vector<int> labels(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.cols(); ++c) {
      if (p.at(r, c) > p.at(r, best)) best = c;
    }
    labels[r] = static_cast<int>(best);
  }
  return labels;
}

ClassifierOutput classifier_forward(const Classifier& c, const ad::Tensor& x) {
  ClassifierOutput out;
  out.head = c.spec().head;
  if (x.rank() != 2 || x.cols() != c.spec().input_dim) {
    throw ad::ShapeError("classifier input must have " +
                         std::to_string(c.spec().input_dim) + " columns");
  }
  if (c.evidential()) {
    const ad::Tensor alpha = c.predict_alpha(x);
    out.alphas.reserve(alpha.rows());
    out.probabilities = ad::Tensor(alpha.shape());
    for (std::size_t r = 0; r < alpha.rows(); ++r) {
      std::vector<double> row(alpha.cols());
      for (std::size_t k = 0; k < row.size(); ++k) row[k] = alpha.at(r, k);
      out.alphas.emplace_back(std::move(row));
      const auto p = sl::expected_probability(out.alphas.back());
      for (std::size_t k = 0; k < p.size(); ++k) {
        out.probabilities.at(r, k) = static_cast<Real>(p[k]);
      }
    }
  } else {
    out.probabilities = c.predict_probabilities(x);
  }
  return out;
}

Generator::Generator(MlpSpec spec, LatentPrior prior)
    : net_(checked(std::move(spec), HeadKind::kLinear, HeadKind::kLinear,
                   "generator")),
      prior_(prior) {}

Generator::Generator(MlpSpec spec, LatentPrior prior, data::Rng& rng)
    : net_(checked(std::move(spec), HeadKind::kLinear, HeadKind::kLinear,
                   "generator"),
           rng),
      prior_(prior) {}

ad::Tensor Generator::sample_latent(std::size_t m, data::Rng& rng) const {
  ad::Tensor z(ad::Shape{m, latent_dim()});
  for (Real& v : z.data()) {
    v = static_cast<Real>(prior_ == LatentPrior::kGaussian ? rng.normal()
                                                           : rng.uniform(-1.0, 1.0));
  }
  return z;
}

ad::Tensor Generator::generate(const ad::Tensor& z) const {
  return chunked_inference(net_, z, [this](std::span<const ad::Var> b, ad::Var in) {
    return forward(b, in);
  });
}

Discriminator::Discriminator(MlpSpec spec)
    : net_(checked(std::move(spec), HeadKind::kLinear, HeadKind::kLinear,
                   "discriminator")) {
  if (net_.spec().output_dim != 1) {
    throw std::invalid_argument("discriminator output must be scalar");
  }
}

Discriminator::Discriminator(MlpSpec spec, data::Rng& rng)
    : net_(checked(std::move(spec), HeadKind::kLinear, HeadKind::kLinear,
                   "discriminator"),
           rng) {
  if (net_.spec().output_dim != 1) {
    throw std::invalid_argument("discriminator output must be scalar");
  }
}

ad::Tensor Discriminator::score(const ad::Tensor& x) const {
  return chunked_inference(net_, x, [this](std::span<const ad::Var> b, ad::Var in) {
    return forward(b, in);
  });
}

std::string to_string(LatentPrior prior) {
  return prior == LatentPrior::kGaussian ? "gaussian" : "uniform";
}

LatentPrior parse_prior(const std::string& s) {
  if (s == "gaussian") return LatentPrior::kGaussian;
  if (s == "uniform") return LatentPrior::kUniform;
  throw std::invalid_argument("unknown latent prior '" + s + "'");
}

}  // namespace evuq::models
