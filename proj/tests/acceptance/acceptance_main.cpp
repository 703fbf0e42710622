// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
//   acceptance_test --workdir DIR --config FILE [--only 1,2,...]
//
// Criteria 5 to 11 drive the evuq command line on a fresh synthetic dataset:
// one WENN run, plain ENN and L2 softmax baselines from the same config and
// seed, an FGSM sweep, and a second WENN run for the reproducibility check.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "evuq/autodiff/ops.hpp"
#include "evuq/data/csv.hpp"
#include "evuq/data/dataset.hpp"
#include "evuq/losses/losses.hpp"
#include "evuq/metrics/metrics.hpp"
#include "evuq/models/checkpoint.hpp"
#include "evuq/sl/subjective_logic.hpp"
#include "evuq/trainer/trainer.hpp"
#include "manifest.hpp"
#include "run_config.hpp"
#include "support/gradcheck.hpp"
#include "support/gradcheck_suite.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace evuq;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs one evuq command line, echoing its output under a prefix.
int evuq_cli(const std::vector<std::string>& args) {
  std::vector<std::string> argv{"evuq"};
  argv.insert(argv.end(), args.begin(), args.end());
  std::ostringstream out, err;
  const int code = cli::run_cli(argv, out, err);
  std::istringstream lines(out.str() + err.str());
  for (std::string line; std::getline(lines, line);) std::cout << "    | " << line << '\n';
  return code;
}

// ------------------------------------------------------------ criteria 1-4

Verdict closed_forms() {
  struct Case {
    std::vector<double> alpha;
    double vac, diss;
  };
  const std::vector<Case> cases = {
      {{1, 1, 1}, 1.0, 0.0}, {{50, 50, 50}, 0.02, 0.98}, {{50, 1, 1}, 3.0 / 52.0, 0.0}};
  double worst = 0.0;
  for (const auto& c : cases) {
    const sl::DirichletParams a(c.alpha);
    worst = std::max({worst, std::abs(sl::vacuity(a) - c.vac),
                      std::abs(sl::dissonance(a) - c.diss)});
  }
  return {worst <= 1e-9, "max abs error " + fmt("%.3g", worst) + " (tolerance 1e-9)"};
}

Verdict loss_vs_monte_carlo() {
  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> evidence(0.0, 20.0);
  double worst_z = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    ad::Tensor a_t(ad::Shape{1, 3});
    for (auto& v : a_t.data()) v = static_cast<Real>(1.0 + evidence(rng));
    const std::vector<double> alpha(a_t.data().begin(), a_t.data().end());
    const int label = pair % 3;
    std::vector<double> y(3, 0.0);
    y[static_cast<std::size_t>(label)] = 1.0;
    ad::Tape tape;
    const double loss =
        losses::enn_sq_loss(tape.constant(a_t), losses::one_hot(std::vector<int>{label}, 3))
            .value;
    const auto mc = testing::monte_carlo_sq_error(alpha, y, 100000, rng);
    worst_z = std::max(worst_z, std::abs(loss - mc.mean) / mc.standard_error);
  }
  return {worst_z <= 3.0, "worst deviation " + fmt("%.2f", worst_z) + " SE over 20 pairs"};
}

Verdict gradcheck_all() {
  const testing::GradcheckOptions opts{2e-2, 1e-2};
  double worst = 0.0;
  std::string worst_label;
  std::size_t checked = 0, skipped = 0, cases = 0;
  bool ok = true;
  for (const auto& c : testing::gradcheck_cases()) {
    const auto r = testing::gradcheck(c.fn, c.inputs, opts);
    ++cases;
    checked += r.checked;
    skipped += r.skipped;
    if (r.checked == 0 || r.skipped * 10 > r.checked) ok = false;
    if (r.norm_rel_error > worst) {
      worst = r.norm_rel_error;
      worst_label = c.label;
    }
  }
  ok = ok && worst < 1e-3;
  return {ok, std::to_string(cases) + " cases, " + std::to_string(checked) +
                  " entries, worst relative error " + fmt("%.2e", worst) + " (" + worst_label +
                  "), " + std::to_string(skipped) + " kink skips"};
}

Verdict auroc_vs_pairs() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> size(1, 50);
  std::uniform_int_distribution<int> coarse(0, 12);
  std::normal_distribution<double> fine(0.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> neg(static_cast<std::size_t>(size(rng)));
    std::vector<double> pos(static_cast<std::size_t>(size(rng)));
    // Half the instances use coarse integer scores to force ties.
    const bool tied = trial % 2 == 0;
    for (auto& v : neg) v = tied ? coarse(rng) : fine(rng);
    for (auto& v : pos) v = tied ? coarse(rng) + trial % 3 : fine(rng) + 0.5;
    if (metrics::auroc(neg, pos) != testing::pairwise_auroc(neg, pos)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 200 instances differ"};
}

// ----------------------------------------------------------- criteria 5-11

struct Artifacts {
  fs::path data;
  fs::path wenn, wenn_again, enn, l2;
  double wenn_wall_seconds = 0.0;
  double wenn_cpu_seconds = 0.0;
  bool wenn_ok = false, wenn_again_ok = false, enn_ok = false, l2_ok = false;
  int sweep_code = -1;
};

bool train(const std::string& model, const fs::path& config, const fs::path& data,
           const fs::path& out) {
  fs::remove_all(out);
  std::cout << "  train --model " << model << " -> " << out.string() << std::endl;
  return evuq_cli({"train", "--model", model, "--config", config.string(), "--data",
                   data.string(), "--out", out.string()}) == cli::kExitOk;
}

double mean_score(const models::Classifier& f, const ad::Tensor& x, metrics::ScoreKind kind) {
  return metrics::mean(metrics::sample_scores(f, x, kind));
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

class EndToEnd {
 public:
  EndToEnd(fs::path workdir, fs::path config) : dir_(std::move(workdir)), config_(std::move(config)) {}

  void prepare(bool need_wenn, bool need_baselines, bool need_rerun, bool need_sweep) {
    cfg_ = cli::load_run_config(config_);
    a_.data = dir_ / "data";
    a_.wenn = dir_ / "wenn";
    a_.wenn_again = dir_ / "wenn_again";
    a_.enn = dir_ / "enn";
    a_.l2 = dir_ / "l2";
    fs::create_directories(dir_);
    std::cout << "  gen-data --seed " << cfg_.train.seed << std::endl;
    evuq_cli({"gen-data", "--out", a_.data.string(), "--seed",
              std::to_string(cfg_.train.seed), "--n-per-class",
              std::to_string(cfg_.n_per_class)});
    if (need_wenn) {
      const auto wall = std::chrono::steady_clock::now();
      const std::clock_t cpu = std::clock();
      a_.wenn_ok = train("wenn", config_, a_.data, a_.wenn);
      a_.wenn_cpu_seconds = static_cast<double>(std::clock() - cpu) / CLOCKS_PER_SEC;
      a_.wenn_wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - wall).count();
      if (a_.wenn_ok) wenn_ = models::load_checkpoint(a_.wenn / "model.ckpt");
    }
    if (need_baselines) {
      a_.enn_ok = train("enn", config_, a_.data, a_.enn);
      a_.l2_ok = train("l2", config_, a_.data, a_.l2);
      if (a_.enn_ok) enn_ = models::load_checkpoint(a_.enn / "model.ckpt");
      if (a_.l2_ok) l2_ = models::load_checkpoint(a_.l2 / "model.ckpt");
    }
    if (need_rerun) a_.wenn_again_ok = train("wenn", config_, a_.data, a_.wenn_again);
    if (need_sweep && a_.wenn_ok) {
      std::cout << "  fgsm-sweep" << std::endl;
      a_.sweep_code = evuq_cli({"fgsm-sweep", "--checkpoint", (a_.wenn / "model.ckpt").string(),
                                "--data", (a_.data / "test.csv").string(), "--eps",
                                "0,0.1,0.2,0.3,0.4,0.5", "--out",
                                (dir_ / "fgsm_sweep.csv").string()});
    }
    test_ = data::load_csv(a_.data / "test.csv", 3);
    far_ = data::load_csv(a_.data / "ood_far.csv").features;
    boundary_ = data::load_csv(a_.data / "boundary.csv").features;
    cores_ = data::class_core_sampler(data::GaussianMixture::synthetic(), 300, 1.0,
                                      cfg_.train.seed);
  }

  Verdict synthetic_wenn() const {
    if (!a_.wenn_ok) return {false, "WENN training failed"};
    const auto& f = *wenn_.classifier;
    const double acc = metrics::accuracy(f, test_.features, test_.labels);
    const double vac_id = mean_score(f, test_.features, metrics::ScoreKind::kVacuity);
    const double vac_far = mean_score(f, far_, metrics::ScoreKind::kVacuity);
    const double auc = metrics::auroc(
        metrics::sample_scores(f, test_.features, metrics::ScoreKind::kVacuity),
        metrics::sample_scores(f, far_, metrics::ScoreKind::kVacuity));
    const bool ok = acc >= 0.85 && vac_id < 0.2 && vac_far > 0.8 && auc >= 0.95 &&
                    a_.wenn_cpu_seconds <= 600.0;
    return {ok, "accuracy " + fmt("%.4f", acc) + " (>= 0.85), ID vacuity " +
                    fmt("%.4f", vac_id) + " (< 0.2), far vacuity " + fmt("%.4f", vac_far) +
                    " (> 0.8), AUROC " + fmt("%.4f", auc) + " (>= 0.95), CPU " +
                    fmt("%.0f", a_.wenn_cpu_seconds) + " s, wall " +
                    fmt("%.0f", a_.wenn_wall_seconds) + " s (<= 600 s)"};
  }

  Verdict three_way_contrast() const {
    if (!a_.wenn_ok || !a_.enn_ok || !a_.l2_ok) return {false, "a training run failed"};
    const double wenn = mean_score(*wenn_.classifier, far_, metrics::ScoreKind::kVacuity);
    const double enn = mean_score(*enn_.classifier, far_, metrics::ScoreKind::kVacuity);
    const double l2_ent = mean_score(*l2_.classifier, far_, metrics::ScoreKind::kEntropy);
    const bool ok = wenn - enn >= 0.3 && l2_ent < 0.5;
    return {ok, "far vacuity WENN " + fmt("%.4f", wenn) + " vs ENN " + fmt("%.4f", enn) +
                    " (gap " + fmt("%.4f", wenn - enn) + ", >= 0.3); L2 far entropy " +
                    fmt("%.4f", l2_ent) + " (< 0.5)"};
  }

  Verdict boundary_vs_far() const {
    if (!a_.wenn_ok) return {false, "WENN training failed"};
    const auto& f = *wenn_.classifier;
    using metrics::ScoreKind;
    const double vac = metrics::auroc(metrics::sample_scores(f, boundary_, ScoreKind::kVacuity),
                                      metrics::sample_scores(f, far_, ScoreKind::kVacuity));
    const double ent = metrics::auroc(metrics::sample_scores(f, boundary_, ScoreKind::kEntropy),
                                      metrics::sample_scores(f, far_, ScoreKind::kEntropy));
    const bool ok = vac >= 0.90 && vac - ent >= 0.10;
    return {ok, "AUROC vacuity " + fmt("%.4f", vac) + " (>= 0.90), entropy " +
                    fmt("%.4f", ent) + ", margin " + fmt("%.4f", vac - ent) + " (>= 0.10)"};
  }

  Verdict dissonance_locality() const {
    if (!a_.wenn_ok) return {false, "WENN training failed"};
    const auto& f = *wenn_.classifier;
    const double strip = mean_score(f, boundary_, metrics::ScoreKind::kDissonance);
    const double cores = mean_score(f, cores_, metrics::ScoreKind::kDissonance);
    return {strip - cores >= 0.2, "boundary " + fmt("%.4f", strip) + " vs cores " +
                                      fmt("%.4f", cores) + " (gap " +
                                      fmt("%.4f", strip - cores) + ", >= 0.2)"};
  }

  Verdict dist_trend() const {
    if (!a_.wenn_ok) return {false, "WENN training failed"};
    std::vector<double> dist;
    for (const auto& row : read_numeric_csv(a_.wenn / "trainlog.csv")) dist.push_back(row.at(1));
    const std::size_t w = 50;
    if (dist.size() < w) return {false, "only " + std::to_string(dist.size()) + " iterations"};
    const double peak = *std::max_element(dist.begin(), dist.end());
    for (auto& v : dist) v /= peak;
    const auto ma = trainer::moving_average(dist, w);
    const double first = ma[w - 1];
    const double last = ma.back();
    const auto manifest = cli::read_manifest(a_.wenn / "manifest.txt");
    const bool converged = manifest.get("converged") == std::string("true");
    const bool early = static_cast<std::int64_t>(dist.size()) < cfg_.train.max_g_iters;
    const bool ok = last <= 0.5 * first && converged && early;
    return {ok, "moving average " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) +
                    " (ratio " + fmt("%.3f", last / first) + ", <= 0.5); converged=" +
                    (converged ? "true" : "false") + " after " + std::to_string(dist.size()) +
                    " of " + std::to_string(cfg_.train.max_g_iters) + " iterations"};
  }

  Verdict fgsm_trend() const {
    if (a_.sweep_code != cli::kExitOk) return {false, "fgsm-sweep failed"};
    const auto rows = read_numeric_csv(dir_ / "fgsm_sweep.csv");
    if (rows.size() != 6) return {false, "expected 6 sweep rows"};
    bool ok = true;
    std::string acc = "accuracy", ent = "entropy";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      acc += " " + fmt("%.3f", rows[i][1]);
      ent += " " + fmt("%.3f", rows[i][2]);
      if (i > 0) {
        ok = ok && rows[i][1] <= rows[i - 1][1] + 0.03;
        ok = ok && rows[i][2] >= rows[i - 1][2] - 0.05;
      }
    }
    return {ok, acc + "; " + ent};
  }

  Verdict reproducible() const {
    if (!a_.wenn_ok || !a_.wenn_again_ok) return {false, "a WENN run failed"};
    const bool log_same =
        read_bytes(a_.wenn / "trainlog.csv") == read_bytes(a_.wenn_again / "trainlog.csv");
    const bool ckpt_same =
        read_bytes(a_.wenn / "model.ckpt") == read_bytes(a_.wenn_again / "model.ckpt");
    return {log_same && ckpt_same, std::string("trainlog.csv ") +
                                       (log_same ? "identical" : "differs") + ", model.ckpt " +
                                       (ckpt_same ? "identical" : "differs")};
  }

 private:
  fs::path dir_;
  fs::path config_;
  cli::RunConfig cfg_;
  Artifacts a_;
  models::ModelBundle wenn_, enn_, l2_;
  data::Dataset test_;
  ad::Tensor far_, boundary_, cores_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string workdir, config;
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory for runs")->required();
  app.add_option("--config", config, "Reference WENN run configuration")->required();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  int failures = 0;
  auto report = [&](int id, const char* name, const Verdict& v) {
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << v.detail
              << std::endl;
  };

  try {
    if (wanted(1)) report(1, "subjective logic closed forms", closed_forms());
    if (wanted(2)) report(2, "expected squared loss vs Monte Carlo", loss_vs_monte_carlo());
    if (wanted(3)) report(3, "finite-difference gradcheck", gradcheck_all());
    if (wanted(4)) report(4, "rank AUROC vs pairwise counting", auroc_vs_pairs());

    const bool wenn = wanted(5) || wanted(6) || wanted(7) || wanted(8) || wanted(9) ||
                      wanted(10) || wanted(11);
    if (wenn) {
      EndToEnd e2e(workdir, config);
      e2e.prepare(true, wanted(6), wanted(11), wanted(10));
      if (wanted(5)) report(5, "synthetic WENN end to end", e2e.synthetic_wenn());
      if (wanted(6)) report(6, "WENN / ENN / L2 contrast", e2e.three_way_contrast());
      if (wanted(7)) report(7, "boundary vs far OOD separation", e2e.boundary_vs_far());
      if (wanted(8)) report(8, "dissonance locality", e2e.dissonance_locality());
      if (wanted(9)) report(9, "dist trend and convergence", e2e.dist_trend());
      if (wanted(10)) report(10, "FGSM sweep trend", e2e.fgsm_trend());
      if (wanted(11)) report(11, "bit-identical reruns", e2e.reproducible());
    }
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
