// ENN pretraining, the alternating WGAN/ENN loop, and the two baselines.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "evuq/autodiff/optim.hpp"
#include "evuq/data/dataset.hpp"
#include "evuq/losses/losses.hpp"
#include "evuq/models/networks.hpp"

namespace evuq::trainer {

struct TrainConfig {
  /// Vacuity weight in the classifier objective.
  double beta = 0.1;
  /// Vacuity weight in the generator objective.
  double beta_gen = 0.1;
  int n_d = 2;
  int n_e = 1;
  std::size_t m = 256;
  double lr = 1e-4;
  /// Generator learning rate; 0 means use lr.
  double generator_lr = 0.0;
  /// Learning rate for supervised epochs (ENN pretraining and baselines).
  double pretrain_lr = 1e-4;
  std::int64_t max_g_iters = 3000;
  /// Critic-only steps before the first generator iteration.
  int critic_warmup = 0;
  /// Convergence is not tested before this many generator iterations.
  std::int64_t min_g_iters = 0;
  int pretrain_epochs = 60;
  std::uint64_t seed = 1;
  losses::LipschitzMode lipschitz_mode = losses::LipschitzMode::kGradientPenalty;
  double lambda_gp = 10.0;
  double clip_c = 0.01;
  std::size_t window = 50;
  double tolerance = 0.02;
  std::size_t latent_dim = 32;
  models::EvidenceActivation activation = models::EvidenceActivation::kRelu;
  double l2_weight_decay = 1e-4;
  /// Apply the classifier's descent and vacuity-ascent as two separate
  /// optimizer steps instead of one step on the combined objective.
  bool two_step_enn = false;
  /// Hash parameters around every phase and throw on cross-phase writes.
  bool check_phase_isolation = false;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// One completed generator iteration.
struct IterationRecord {
  std::int64_t iteration = 0;
  double dist = 0.0;
  double critic_loss = 0.0;
  double generator_loss = 0.0;
  double enn_loss = 0.0;
  double id_vacuity = 0.0;
  double gen_vacuity = 0.0;
  double wall_seconds = 0.0;  // kept in memory only
};

/// One supervised epoch.
struct EpochRecord {
  std::int64_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<IterationRecord> iterations;
  bool converged = false;

  std::vector<double> dist_series() const;
};

enum class Phase { kCritic, kGenerator, kEnn };
std::string to_string(Phase phase);

/// Instrumentation. `on_step` runs after every optimizer step.
struct TrainHooks {
  std::function<void(Phase, std::int64_t iteration)> on_step;
  std::function<void(const IterationRecord&)> on_iteration;
};

/// Raised when a phase writes parameters it does not own.
class PhaseIsolationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct SupervisedResult {
  ad::AdamState optimizer;
  std::vector<EpochRecord> epochs;
};

/// Expected-squared-error training for cfg.pretrain_epochs epochs.
SupervisedResult pretrain_enn(models::Classifier& f, const data::Dataset& train,
                              const TrainConfig& cfg);
/// Same as pretrain_enn; the plain evidential baseline.
SupervisedResult train_baseline_enn(models::Classifier& f, const data::Dataset& train,
                                    const TrainConfig& cfg);
/// Cross-entropy with coupled weight decay cfg.l2_weight_decay.
SupervisedResult train_baseline_softmax(models::Classifier& f,
                                        const data::Dataset& train,
                                        const TrainConfig& cfg);

struct WennResult {
  TrainLog log;
  ad::AdamState classifier_opt;
  ad::AdamState generator_opt;
  ad::AdamState critic_opt;
};

/// Alternating critic / generator / classifier updates until dist converges
/// or cfg.max_g_iters iterations complete.
WennResult train_wenn(models::Classifier& f, models::Generator& g,
                      models::Discriminator& d, const data::Dataset& train,
                      const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Plateau test on the last two windows of the dist series. False when the
/// log holds fewer than 2 * window records.
bool convergence_check(const TrainLog& log, std::size_t window, double tolerance);
bool convergence_check(const std::vector<double>& dist, std::size_t window,
                       double tolerance);

/// Trailing moving average; entry i averages the up-to-`window` values
/// ending at i.
std::vector<double> moving_average(const std::vector<double>& series,
                                   std::size_t window);

/// Generator-iteration records as CSV with header
/// iteration,dist,critic_loss,generator_loss,enn_loss,id_vacuity,gen_vacuity
void write_iteration_log(const TrainLog& log, const std::filesystem::path& path);
/// Epoch records as CSV with header epoch,loss,train_accuracy
void write_epoch_log(const std::vector<EpochRecord>& epochs,
                     const std::filesystem::path& path);

}  // namespace evuq::trainer
