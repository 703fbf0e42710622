#include "evuq/trainer/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "evuq/autodiff/ops.hpp"
#include "evuq/data/csv.hpp"

namespace evuq::trainer {
namespace {

using Clock = std::chrono::steady_clock;

ad::AdamConfig adam_config(double lr, double weight_decay = 0.0) {
  ad::AdamConfig c;
  c.lr = lr;
  c.weight_decay = weight_decay;
  return c;
}

// Rows drawn uniformly with replacement.
struct BatchSampler {
  const data::Dataset& set;
  data::Rng rng;

  data::Dataset draw(std::size_t m) {
    std::vector<std::size_t> idx(m);
    for (auto& i : idx) i = rng.index(set.size());
    return set.subset(idx);
  }
};

void shuffle(std::vector<std::size_t>& v, data::Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

double label_accuracy(const models::Classifier& f, const data::Dataset& set) {
  const auto pred = f.predict_labels(set.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == set.labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

enum class SupervisedLoss { kEnn, kCrossEntropy };

SupervisedResult run_epochs(models::Classifier& f, const data::Dataset& train,
                            const TrainConfig& cfg, SupervisedLoss kind,
                            double weight_decay) {
  cfg.validate();
  train.validate();
  if (!train.labeled()) throw std::invalid_argument("training set needs labels");
  if (kind == SupervisedLoss::kEnn && !f.evidential()) {
    throw std::invalid_argument("evidential training needs an evidence head");
  }
  SupervisedResult result{
      ad::AdamState::zeros_like(f.params(), adam_config(cfg.pretrain_lr, weight_decay)),
      {}};
  data::Rng rng(cfg.seed, "shuffle");
  std::vector<std::size_t> order(train.size());
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.m) {
      const std::size_t end = std::min(order.size(), start + cfg.m);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      const data::Dataset batch = train.subset(idx);
      const ad::Tensor y = losses::one_hot(batch.labels, f.num_classes());
      ad::Tape tape;
      const auto params = f.bind(tape, true);
      ad::Var x = tape.constant(batch.features);
      losses::LossValue loss =
          kind == SupervisedLoss::kEnn
              ? losses::enn_sq_loss(f.alpha(params, x), y)
              : losses::cross_entropy_from_logits(f.logits(params, x), y);
      if (!std::isfinite(loss.value)) {
        throw ad::TrainingError("pretrain", step, "loss is not finite");
      }
      const auto grads = tape.backward(loss.node, params);
      ad::adam_step(f.params(), grads, result.optimizer, step, "pretrain");
      loss_sum += loss.value;
      ++batches;
      ++step;
    }
    result.epochs.push_back({epoch, loss_sum / static_cast<double>(batches),
                             label_accuracy(f, train)});
  }
  return result;
}

class IsolationGuard {
 public:
  IsolationGuard(bool enabled, Phase phase, std::int64_t iteration,
                 std::vector<const ad::ParameterSet*> frozen)
      : enabled_(enabled), phase_(phase), iteration_(iteration), frozen_(std::move(frozen)) {
    if (!enabled_) return;
    for (const auto* p : frozen_) before_.push_back(p->digest());
  }
  void check() const {
    if (!enabled_) return;
    for (std::size_t i = 0; i < frozen_.size(); ++i) {
      if (frozen_[i]->digest() != before_[i]) {
        throw PhaseIsolationError(to_string(phase_) + " step at iteration " +
                                  std::to_string(iteration_) +
                                  " modified parameters it does not own");
      }
    }
  }

 private:
  bool enabled_;
  Phase phase_;
  std::int64_t iteration_;
  std::vector<const ad::ParameterSet*> frozen_;
  std::vector<std::uint64_t> before_;
};

void require_finite(double v, const char* phase, std::int64_t it, const char* what) {
  if (!std::isfinite(v)) throw ad::TrainingError(phase, it, std::string(what) + " is not finite");
}

}  // namespace

void TrainConfig::validate() const {
  if (n_d < 1) throw std::invalid_argument("n_d must be at least 1");
  if (n_e < 0) throw std::invalid_argument("n_e must be non-negative");
  if (m < 2) throw std::invalid_argument("batch size m must be at least 2");
  if (!(lr > 0.0) || !(pretrain_lr > 0.0)) {
    throw std::invalid_argument("learning rates must be positive");
  }
  if (!(generator_lr >= 0.0)) throw std::invalid_argument("generator_lr must be non-negative");
  if (!(beta >= 0.0) || !(beta_gen >= 0.0)) {
    throw std::invalid_argument("beta must be non-negative");
  }
  if (max_g_iters < 0 || min_g_iters < 0) {
    throw std::invalid_argument("iteration budgets must be non-negative");
  }
  if (critic_warmup < 0) throw std::invalid_argument("critic_warmup must be non-negative");
  if (pretrain_epochs < 0) throw std::invalid_argument("pretrain_epochs must be non-negative");
  if (!(lambda_gp >= 0.0)) throw std::invalid_argument("lambda_gp must be non-negative");
  if (!(clip_c > 0.0)) throw std::invalid_argument("clip_c must be positive");
  if (window < 1) throw std::invalid_argument("convergence window must be positive");
  if (!(tolerance > 0.0)) throw std::invalid_argument("convergence tolerance must be positive");
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be positive");
  if (!(l2_weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be non-negative");
}

std::vector<double> TrainLog::dist_series() const {
  std::vector<double> out;
  out.reserve(iterations.size());
  for (const auto& r : iterations) out.push_back(r.dist);
  return out;
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kCritic: return "critic";
    case Phase::kGenerator: return "gen";
    case Phase::kEnn: return "enn";
  }
  return "unknown";
}

SupervisedResult pretrain_enn(models::Classifier& f, const data::Dataset& train,
                              const TrainConfig& cfg) {
  return run_epochs(f, train, cfg, SupervisedLoss::kEnn, 0.0);
}

SupervisedResult train_baseline_enn(models::Classifier& f, const data::Dataset& train,
                                    const TrainConfig& cfg) {
  return pretrain_enn(f, train, cfg);
}

SupervisedResult train_baseline_softmax(models::Classifier& f,
                                        const data::Dataset& train,
                                        const TrainConfig& cfg) {
  return run_epochs(f, train, cfg, SupervisedLoss::kCrossEntropy, cfg.l2_weight_decay);
}

WennResult train_wenn(models::Classifier& f, models::Generator& g,
                      models::Discriminator& d, const data::Dataset& train,
                      const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  train.validate();
  if (!train.labeled()) throw std::invalid_argument("training set needs labels");
  if (!f.evidential()) throw std::invalid_argument("WENN needs an evidence head");
  if (g.output_dim() != train.dim() || d.spec().input_dim != train.dim()) {
    throw std::invalid_argument("generator/critic dimensions do not match the data");
  }

  WennResult out{{},
                 ad::AdamState::zeros_like(f.params(), adam_config(cfg.lr)),
                 ad::AdamState::zeros_like(
                     g.params(), adam_config(cfg.generator_lr > 0.0 ? cfg.generator_lr : cfg.lr)),
                 ad::AdamState::zeros_like(d.params(), adam_config(cfg.lr))};
  BatchSampler real{train, data::Rng(cfg.seed, "batch")};
  data::Rng latent(cfg.seed, "latent");
  data::Rng gp_rng(cfg.seed, "gp");
  const auto start = Clock::now();
  const bool iso = cfg.check_phase_isolation;

  data::Dataset real_batch;
  ad::Tensor fake;
  // One critic update on a fresh real/fake pair; returns the loss.
  auto critic_step = [&](std::int64_t it) {
    real_batch = real.draw(cfg.m);
    fake = g.generate(g.sample_latent(cfg.m, latent));
    ad::Tape tape;
    std::vector<ad::Var> bound;
    const auto critic = losses::bind_critic(tape, d, true, &bound);
    const auto loss = losses::critic_loss(tape, critic, real_batch.features, fake,
                                          cfg.lipschitz_mode, cfg.lambda_gp, gp_rng);
    require_finite(loss.value, "critic", it, "critic loss");
    const auto grads = tape.backward(loss.node, bound);
    ad::adam_step(d.params(), grads, out.critic_opt, it, "critic");
    if (cfg.lipschitz_mode == losses::LipschitzMode::kClip) {
      ad::clip_weights(d.params(), cfg.clip_c);
    }
    if (hooks.on_step) hooks.on_step(Phase::kCritic, it);
    return loss.value;
  };

  // Warmup steps are reported with iteration -1.
  {
    IsolationGuard guard(iso, Phase::kCritic, -1, {&f.params(), &g.params()});
    for (int k = 0; k < cfg.critic_warmup; ++k) critic_step(-1);
    guard.check();
  }

  for (std::int64_t it = 0; it < cfg.max_g_iters; ++it) {
    IterationRecord rec;
    rec.iteration = it;

    {
      IsolationGuard guard(iso, Phase::kCritic, it, {&f.params(), &g.params()});
      for (int k = 0; k < cfg.n_d; ++k) rec.critic_loss = critic_step(it);
      guard.check();
    }

    // dist sits between the critic and generator updates.
    rec.dist = losses::wasserstein_estimate(d, real_batch.features, fake);
    require_finite(rec.dist, "critic", it, "dist");

    // Generator: ascend D(G(z)) + beta Vac(f(G(z))).
    {
      IsolationGuard guard(iso, Phase::kGenerator, it, {&f.params(), &d.params()});
      ad::Tape tape;
      const auto gen_params = g.bind(tape, true);
      const auto z = g.sample_latent(cfg.m, latent);
      auto parts = losses::generator_loss(tape, g, gen_params, d, f, z, cfg.beta_gen);
      require_finite(parts.total.value, "gen", it, "generator objective");
      const auto grads = tape.backward(ad::neg(parts.total.node), gen_params);
      ad::adam_step(g.params(), grads, out.generator_opt, it, "gen");
      rec.generator_loss = parts.total.value;
      rec.gen_vacuity = parts.mean_vacuity;
      if (hooks.on_step) hooks.on_step(Phase::kGenerator, it);
      guard.check();
    }

    // Classifier.
    {
      IsolationGuard guard(iso, Phase::kEnn, it, {&g.params(), &d.params()});
      for (int k = 0; k < cfg.n_e; ++k) {
        const data::Dataset batch = real.draw(cfg.m);
        const ad::Tensor y = losses::one_hot(batch.labels, f.num_classes());
        const ad::Tensor generated = g.generate(g.sample_latent(cfg.m, latent));
        if (!cfg.two_step_enn) {
          ad::Tape tape;
          const auto params = f.bind(tape, true);
          ad::Var a_in = f.alpha(params, tape.constant(batch.features));
          ad::Var a_out = f.alpha(params, tape.constant(generated));
          const auto loss = losses::regularized_enn_loss(a_in, y, a_out, cfg.beta);
          require_finite(loss.value, "enn", it, "classifier loss");
          const auto grads = tape.backward(loss.node, params);
          ad::adam_step(f.params(), grads, out.classifier_opt, it, "enn");
          rec.enn_loss = loss.value;
          rec.id_vacuity = losses::mean_vacuity(a_in).value;
        } else {
          {
            ad::Tape tape;
            const auto params = f.bind(tape, true);
            ad::Var a_in = f.alpha(params, tape.constant(batch.features));
            const auto loss = losses::enn_sq_loss(a_in, y);
            require_finite(loss.value, "enn", it, "classifier loss");
            const auto grads = tape.backward(loss.node, params);
            ad::adam_step(f.params(), grads, out.classifier_opt, it, "enn");
            rec.enn_loss = loss.value;
            rec.id_vacuity = losses::mean_vacuity(a_in).value;
          }
          ad::Tape tape;
          const auto params = f.bind(tape, true);
          const auto vac = losses::mean_vacuity(f.alpha(params, tape.constant(generated)));
          require_finite(vac.value, "enn", it, "vacuity");
          const auto grads = tape.backward(ad::scale(vac.node, -cfg.beta), params);
          ad::adam_step(f.params(), grads, out.classifier_opt, it, "enn");
          rec.enn_loss -= cfg.beta * vac.value;
        }
        if (hooks.on_step) hooks.on_step(Phase::kEnn, it);
      }
      if (cfg.n_e == 0) {
        ad::Tape tape;
        ad::Var a = tape.constant(f.predict_alpha(real_batch.features));
        rec.id_vacuity = losses::mean_vacuity(a).value;
        rec.enn_loss = losses::enn_sq_loss(
                           a, losses::one_hot(real_batch.labels, f.num_classes()))
                           .value;
      }
      guard.check();
    }

    rec.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    out.log.iterations.push_back(rec);
    if (hooks.on_iteration) hooks.on_iteration(rec);
    if (it + 1 >= cfg.min_g_iters &&
        convergence_check(out.log, cfg.window, cfg.tolerance)) {
      out.log.converged = true;
      break;
    }
  }
  return out;
}

bool convergence_check(const std::vector<double>& dist, std::size_t window,
                       double tolerance) {
  if (window == 0 || dist.size() < 2 * window) return false;
  const auto last = dist.end();
  const double recent =
      std::accumulate(last - static_cast<std::ptrdiff_t>(window), last, 0.0) /
      static_cast<double>(window);
  const double previous =
      std::accumulate(last - static_cast<std::ptrdiff_t>(2 * window),
                      last - static_cast<std::ptrdiff_t>(window), 0.0) /
      static_cast<double>(window);
  return std::abs(recent - previous) < tolerance * std::max(1.0, std::abs(previous));
}

bool convergence_check(const TrainLog& log, std::size_t window, double tolerance) {
  return convergence_check(log.dist_series(), window, tolerance);
}

std::vector<double> moving_average(const std::vector<double>& series,
                                   std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  std::vector<double> out(series.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    acc += series[i];
    if (i >= window) acc -= series[i - window];
    out[i] = acc / static_cast<double>(std::min(window, i + 1));
  }
  return out;
}

namespace {
std::ofstream open_log(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}
}  // namespace

void write_iteration_log(const TrainLog& log, const std::filesystem::path& path) {
  auto out = open_log(path);
  out << "iteration,dist,critic_loss,generator_loss,enn_loss,id_vacuity,gen_vacuity\n";
  for (const auto& r : log.iterations) {
    out << r.iteration << ',' << data::format_double(r.dist) << ','
        << data::format_double(r.critic_loss) << ','
        << data::format_double(r.generator_loss) << ','
        << data::format_double(r.enn_loss) << ',' << data::format_double(r.id_vacuity)
        << ',' << data::format_double(r.gen_vacuity) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_epoch_log(const std::vector<EpochRecord>& epochs,
                     const std::filesystem::path& path) {
  auto out = open_log(path);
  out << "epoch,loss,train_accuracy\n";
  for (const auto& r : epochs) {
    out << r.epoch << ',' << data::format_double(r.loss) << ','
        << data::format_double(r.train_accuracy) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace evuq::trainer
