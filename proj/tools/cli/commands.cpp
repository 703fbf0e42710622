#include "commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "evuq/autodiff/optim.hpp"
#include "evuq/data/csv.hpp"
#include "evuq/data/dataset.hpp"
#include "evuq/metrics/maps.hpp"
#include "evuq/metrics/metrics.hpp"
#include "evuq/models/checkpoint.hpp"
#include "evuq/trainer/trainer.hpp"
#include "manifest.hpp"
#include "run_config.hpp"

namespace evuq::cli {
namespace fs = std::filesystem;
namespace {

constexpr std::size_t kOodCount = 1000;
constexpr std::size_t kBoundaryCount = 1000;

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

data::Dataset load_labeled(const fs::path& path, std::size_t classes) {
  data::Dataset d = data::load_csv(path, classes);
  if (!d.labeled()) {
    throw data::CsvError(data::CsvError::Kind::kHeader, 1,
                         path.string() + " has no label column");
  }
  return d;
}

models::ModelBundle load_bundle(const fs::path& path) {
  models::ModelBundle b = models::load_checkpoint(path);
  if (!b.classifier) throw models::CorruptManifestError("checkpoint holds no classifier");
  return b;
}

std::string stem(const fs::path& p) { return p.stem().string(); }

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string out;
  std::uint64_t seed = 0;
  long long n_per_class = 1000;
};

int gen_data(const GenDataArgs& a, std::ostream& out) {
  if (a.n_per_class <= 0) throw UsageError("--n-per-class must be positive");
  const fs::path dir(a.out);
  ensure_dir(dir);
  const auto all = data::gen_gaussian_mixture(static_cast<std::size_t>(a.n_per_class), a.seed);
  auto [train, test] = data::stratified_split(all, 0.8, a.seed);
  const auto far = data::gen_uniform_ood(kOodCount, data::OodBox{}, a.seed);
  const auto strip = data::boundary_strip_sampler(data::GaussianMixture::synthetic(),
                                                  kBoundaryCount, a.seed);
  data::save_csv(train, dir / "train.csv");
  data::save_csv(test, dir / "test.csv");
  data::save_csv(far, dir / "ood_far.csv");
  data::save_csv(strip, dir / "boundary.csv");
  out << "train=" << train.size() << " test=" << test.size() << " ood_far=" << far.rows()
      << " boundary=" << strip.rows() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string model;
  std::string config;
  std::string data;
  std::string out;
};

int train(const TrainArgs& a, std::ostream& out) {
  const auto wall_start = std::chrono::steady_clock::now();
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  const std::string hash = cfg.hash();
  const fs::path data_dir(a.data);
  const fs::path out_dir(a.out);
  const auto train_set = load_labeled(data_dir / "train.csv", 3);
  const auto test_set = load_labeled(data_dir / "test.csv", 3);
  ensure_dir(out_dir);

  const std::uint64_t seed = cfg.train.seed;
  data::Rng init_f(seed, "init.classifier");
  models::ModelBundle bundle;
  bundle.model_kind = a.model;
  bundle.config_hash = hash;
  Manifest manifest;
  manifest.set("tool_version", kToolVersion);
  manifest.set("command", "train");
  manifest.set("model", a.model);
  manifest.set("config_hash", hash);
  manifest.set("seed", std::to_string(seed));

  if (a.model == "l2" || a.model == "enn") {
    const bool evidential = a.model == "enn";
    models::Classifier f(cfg.classifier_spec(evidential), init_f);
    auto result = evidential ? trainer::train_baseline_enn(f, train_set, cfg.train)
                             : trainer::train_baseline_softmax(f, train_set, cfg.train);
    trainer::write_epoch_log(result.epochs, out_dir / "trainlog.csv");
    bundle.iteration = static_cast<std::int64_t>(result.epochs.size());
    bundle.classifier = std::move(f);
    bundle.classifier_opt = std::move(result.optimizer);
  } else if (a.model == "wenn") {
    models::Classifier f(cfg.classifier_spec(true), init_f);
    data::Rng init_g(seed, "init.generator");
    data::Rng init_d(seed, "init.critic");
    models::Generator g(cfg.generator_spec(), cfg.latent_prior, init_g);
    if (cfg.generator_init_scale != 1.0) g.net().scale_output_layer(cfg.generator_init_scale);
    models::Discriminator d(cfg.critic_spec(), init_d);
    auto pre = trainer::pretrain_enn(f, train_set, cfg.train);
    trainer::write_epoch_log(pre.epochs, out_dir / "pretrainlog.csv");
    auto result = trainer::train_wenn(f, g, d, train_set, cfg.train);
    trainer::write_iteration_log(result.log, out_dir / "trainlog.csv");
    const auto& iters = result.log.iterations;
    bundle.iteration = static_cast<std::int64_t>(iters.size());
    manifest.set("g_iterations", std::to_string(iters.size()));
    manifest.set("converged", result.log.converged ? "true" : "false");
    if (!iters.empty()) manifest.set("final_dist", data::format_double(iters.back().dist));
    out << "g_iterations=" << iters.size()
        << " converged=" << (result.log.converged ? "true" : "false");
    if (!iters.empty()) out << " final_dist=" << fixed4(iters.back().dist);
    out << '\n';
    bundle.classifier = std::move(f);
    bundle.generator = std::move(g);
    bundle.discriminator = std::move(d);
    bundle.classifier_opt = std::move(result.classifier_opt);
    bundle.generator_opt = std::move(result.generator_opt);
    bundle.discriminator_opt = std::move(result.critic_opt);
  } else {
    throw UsageError("--model must be one of l2, enn, wenn");
  }

  const fs::path ckpt = out_dir / "model.ckpt";
  models::save_checkpoint(ckpt, bundle);
  const double train_acc =
      metrics::accuracy(*bundle.classifier, train_set.features, train_set.labels);
  const double test_acc =
      metrics::accuracy(*bundle.classifier, test_set.features, test_set.labels);
  out << "train_accuracy=" << fixed4(train_acc) << " test_accuracy=" << fixed4(test_acc)
      << '\n';
  manifest.set("checkpoint", ckpt.string());
  manifest.set("trainlog", (out_dir / "trainlog.csv").string());
  manifest.set("train_accuracy", data::format_double(train_acc));
  manifest.set("test_accuracy", data::format_double(test_acc));
  manifest.set("wall_clock_seconds",
               data::format_double(std::chrono::duration<double>(
                                       std::chrono::steady_clock::now() - wall_start)
                                       .count()));
  write_manifest(out_dir / "manifest.txt", manifest);
  return kExitOk;
}

// --------------------------------------------------------------- eval-grid

data::GridSpec parse_grid(const std::string& text) {
  const auto v = parse_number_list(text);
  if (v.size() != 5) throw UsageError("--grid expects xmin,xmax,ymin,ymax,res");
  if (v[4] != std::floor(v[4]) || v[4] < 2 || v[4] > 1e5) {
    throw UsageError("--grid resolution must be an integer >= 2");
  }
  data::GridSpec g{v[0], v[1], v[2], v[3], static_cast<std::size_t>(v[4]),
                   static_cast<std::size_t>(v[4])};
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--grid: ") + e.what());
  }
  return g;
}

int eval_grid(const std::string& checkpoint, const std::string& out_dir,
              const std::string& grid_text, std::ostream& out) {
  const data::GridSpec grid = grid_text.empty() ? data::GridSpec{} : parse_grid(grid_text);
  const auto bundle = load_bundle(checkpoint);
  const fs::path dir(out_dir);
  ensure_dir(dir);
  const auto maps = metrics::uncertainty_maps(*bundle.classifier, grid);
  metrics::export_heatmap(maps.entropy, dir / "entropy.csv", dir / "entropy.pgm");
  out << "entropy mean=" << fixed4(metrics::mean(maps.entropy.values)) << '\n';
  if (maps.vacuity) {
    metrics::export_heatmap(*maps.vacuity, dir / "vacuity.csv", dir / "vacuity.pgm");
    metrics::export_heatmap(*maps.dissonance, dir / "dissonance.csv", dir / "dissonance.pgm");
    out << "vacuity mean=" << fixed4(metrics::mean(maps.vacuity->values)) << '\n';
    out << "dissonance mean=" << fixed4(metrics::mean(maps.dissonance->values)) << '\n';
  }
  return kExitOk;
}

// ------------------------------------------------------------------- auroc

int auroc(const std::string& checkpoint, const std::string& id_path,
          const std::string& ood_path, const std::string& score, std::ostream& out) {
  metrics::ScoreKind kind;
  if (score == "vac") {
    kind = metrics::ScoreKind::kVacuity;
  } else if (score == "ent") {
    kind = metrics::ScoreKind::kEntropy;
  } else {
    throw UsageError("--score must be vac or ent");
  }
  const auto bundle = load_bundle(checkpoint);
  const auto& f = *bundle.classifier;
  if (kind == metrics::ScoreKind::kVacuity && !f.evidential()) {
    throw UsageError("vacuity undefined for softmax head");
  }
  const auto id = data::load_csv(id_path, f.num_classes());
  const auto ood = data::load_csv(ood_path, f.num_classes());
  const auto neg = metrics::score_set(f, id.features, kind, metrics::SetLabel::kId);
  const auto pos = metrics::score_set(f, ood.features, kind, metrics::SetLabel::kOod);
  const double value = metrics::auroc(neg, pos);
  out << "auroc=" << fixed4(value) << '\n';

  const fs::path manifest_path = fs::path(checkpoint).parent_path() / "manifest.txt";
  Manifest manifest = read_manifest(manifest_path);
  const std::string pair = stem(id_path) + "." + stem(ood_path);
  manifest.set("auroc." + score + "." + pair, data::format_double(value));
  if (id.labeled()) {
    const double acc = metrics::accuracy(f, id.features, id.labels);
    out << "accuracy=" << fixed4(acc) << '\n';
    manifest.set("accuracy." + stem(id_path), data::format_double(acc));
  }
  write_manifest(manifest_path, manifest);
  return kExitOk;
}

// -------------------------------------------------------------- fgsm-sweep

int fgsm_sweep(const std::string& checkpoint, const std::string& data_path,
               const std::string& eps_text, const std::string& out_path, std::ostream& out) {
  const auto eps = parse_number_list(eps_text);
  if (eps.empty()) throw UsageError("--eps needs at least one value");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (eps[i] < 0.0 || eps[i] > 0.5) throw UsageError("--eps values must lie in [0, 0.5]");
    if (i > 0 && eps[i] < eps[i - 1]) throw UsageError("--eps values must not decrease");
  }
  const auto bundle = load_bundle(checkpoint);
  const auto test = load_labeled(data_path, bundle.classifier->num_classes());
  const auto rows = metrics::fgsm_sweep(*bundle.classifier, test, eps);
  metrics::write_sweep_csv(rows, out_path);
  for (const auto& r : rows) {
    out << "epsilon=" << r.epsilon << " accuracy=" << fixed4(r.accuracy)
        << " mean_entropy=" << fixed4(r.mean_entropy) << '\n';
  }
  return kExitOk;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw UsageError("empty entry in list '" + text + "'");
    const std::string t = item.substr(b, e - b + 1);
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &pos);
    } catch (const std::exception&) {
      throw UsageError("'" + t + "' is not a number");
    }
    if (pos != t.size() || !std::isfinite(v)) throw UsageError("'" + t + "' is not a number");
    out.push_back(v);
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evidential uncertainty toolkit: data, training and evaluation"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write the synthetic datasets");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Run seed")->required();
  gen_cmd->add_option("--n-per-class", gen.n_per_class, "Samples per class")
      ->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier");
  train_cmd->add_option("--model", tr.model, "l2 | enn | wenn")
      ->required()
      ->check(CLI::IsMember({"l2", "enn", "wenn"}));
  train_cmd->add_option("--config", tr.config, "key=value run configuration");
  train_cmd->add_option("--data", tr.data, "Directory holding train.csv and test.csv")
      ->required();
  train_cmd->add_option("--out", tr.out, "Output directory")->required();

  std::string ckpt, out_dir, grid;
  auto* grid_cmd = app.add_subcommand("eval-grid", "Uncertainty heatmaps over a grid");
  grid_cmd->add_option("--checkpoint", ckpt)->required();
  grid_cmd->add_option("--out", out_dir)->required();
  grid_cmd->add_option("--grid", grid, "xmin,xmax,ymin,ymax,res");

  std::string id_path, ood_path, score = "vac";
  auto* auroc_cmd = app.add_subcommand("auroc", "OOD detection AUROC");
  auroc_cmd->add_option("--checkpoint", ckpt)->required();
  auroc_cmd->add_option("--id", id_path)->required();
  auroc_cmd->add_option("--ood", ood_path)->required();
  auroc_cmd->add_option("--score", score, "vac | ent")->capture_default_str();

  std::string data_path, eps, out_file;
  auto* fgsm_cmd = app.add_subcommand("fgsm-sweep", "Accuracy and entropy under FGSM");
  fgsm_cmd->add_option("--checkpoint", ckpt)->required();
  fgsm_cmd->add_option("--data", data_path)->required();
  fgsm_cmd->add_option("--eps", eps, "Comma-separated epsilons")->required();
  fgsm_cmd->add_option("--out", out_file)->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return gen_data(gen, out);
    if (*train_cmd) return train(tr, out);
    if (*grid_cmd) return eval_grid(ckpt, out_dir, grid, out);
    if (*auroc_cmd) return auroc(ckpt, id_path, ood_path, score, out);
    if (*fgsm_cmd) return fgsm_sweep(ckpt, data_path, eps, out_file, out);
  } catch (const ad::TrainingError& e) {
    err << "error: training diverged in " << e.phase() << " phase at iteration "
        << e.iteration() << ": " << e.what() << '\n';
    return kExitDivergence;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << '\n';
    return kExitUsage;
  } catch (const metrics::UndefinedScoreError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const models::CheckpointIoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const models::CheckpointError& e) {
    err << "error: checkpoint: " << e.what() << '\n';
    return kExitFormat;
  } catch (const data::CsvError& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == data::CsvError::Kind::kIo ? kExitIo : kExitFormat;
  } catch (const metrics::HeatmapFormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace evuq::cli
