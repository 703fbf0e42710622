#include "run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "evuq/data/csv.hpp"

namespace evuq::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": '" + v + "' is not a number");
  }
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": '" + v + "' is not an integer");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const auto x = to_int(key, v);
  if (x < 0) throw ConfigError(key + ": must be non-negative");
  return static_cast<std::size_t>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": '" + v + "' is not an unsigned integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto w = to_size(key, trim(part));
    if (w == 0) throw ConfigError(key + ": widths must be positive");
    out.push_back(w);
  }
  if (out.empty()) throw ConfigError(key + ": needs at least one width");
  return out;
}

std::string widths(const std::vector<std::size_t>& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(w[i]);
  }
  return out;
}

std::string num(double v) { return data::format_double(v); }

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

const std::map<std::string, Field>& fields() {
  using C = RunConfig;
  using S = const std::string&;
  static const std::map<std::string, Field> table = {
      {"beta", {[](const C& c) { return num(c.train.beta); },
                [](C& c, S k, S v) { c.train.beta = to_double(k, v); }}},
      {"beta_gen", {[](const C& c) { return num(c.train.beta_gen); },
                    [](C& c, S k, S v) { c.train.beta_gen = to_double(k, v); }}},
      {"n_d", {[](const C& c) { return std::to_string(c.train.n_d); },
               [](C& c, S k, S v) { c.train.n_d = static_cast<int>(to_int(k, v)); }}},
      {"n_e", {[](const C& c) { return std::to_string(c.train.n_e); },
               [](C& c, S k, S v) { c.train.n_e = static_cast<int>(to_int(k, v)); }}},
      {"m", {[](const C& c) { return std::to_string(c.train.m); },
             [](C& c, S k, S v) { c.train.m = to_size(k, v); }}},
      {"lr", {[](const C& c) { return num(c.train.lr); },
              [](C& c, S k, S v) { c.train.lr = to_double(k, v); }}},
      {"generator_lr", {[](const C& c) { return num(c.train.generator_lr); },
                        [](C& c, S k, S v) { c.train.generator_lr = to_double(k, v); }}},
      {"pretrain_lr", {[](const C& c) { return num(c.train.pretrain_lr); },
                       [](C& c, S k, S v) { c.train.pretrain_lr = to_double(k, v); }}},
      {"max_g_iters", {[](const C& c) { return std::to_string(c.train.max_g_iters); },
                       [](C& c, S k, S v) { c.train.max_g_iters = to_int(k, v); }}},
      {"min_g_iters", {[](const C& c) { return std::to_string(c.train.min_g_iters); },
                       [](C& c, S k, S v) { c.train.min_g_iters = to_int(k, v); }}},
      {"critic_warmup", {[](const C& c) { return std::to_string(c.train.critic_warmup); },
                         [](C& c, S k, S v) {
                           c.train.critic_warmup = static_cast<int>(to_int(k, v));
                         }}},
      {"pretrain_epochs", {[](const C& c) { return std::to_string(c.train.pretrain_epochs); },
                           [](C& c, S k, S v) {
                             c.train.pretrain_epochs = static_cast<int>(to_int(k, v));
                           }}},
      {"seed", {[](const C& c) { return std::to_string(c.train.seed); },
                [](C& c, S k, S v) { c.train.seed = to_u64(k, v); }}},
      {"lipschitz_mode", {[](const C& c) { return losses::to_string(c.train.lipschitz_mode); },
                          [](C& c, S, S v) {
                            try {
                              c.train.lipschitz_mode = losses::parse_lipschitz_mode(v);
                            } catch (const std::invalid_argument& e) {
                              throw ConfigError(e.what());
                            }
                          }}},
      {"lambda_gp", {[](const C& c) { return num(c.train.lambda_gp); },
                     [](C& c, S k, S v) { c.train.lambda_gp = to_double(k, v); }}},
      {"clip_c", {[](const C& c) { return num(c.train.clip_c); },
                  [](C& c, S k, S v) { c.train.clip_c = to_double(k, v); }}},
      {"convergence_window", {[](const C& c) { return std::to_string(c.train.window); },
                              [](C& c, S k, S v) { c.train.window = to_size(k, v); }}},
      {"convergence_tolerance", {[](const C& c) { return num(c.train.tolerance); },
                                 [](C& c, S k, S v) { c.train.tolerance = to_double(k, v); }}},
      {"latent_dim", {[](const C& c) { return std::to_string(c.train.latent_dim); },
                      [](C& c, S k, S v) { c.train.latent_dim = to_size(k, v); }}},
      {"evidence_activation",
       {[](const C& c) { return models::to_string(c.train.activation); },
        [](C& c, S, S v) {
          try {
            c.train.activation = models::parse_activation(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
          }
        }}},
      {"l2_weight_decay", {[](const C& c) { return num(c.train.l2_weight_decay); },
                           [](C& c, S k, S v) { c.train.l2_weight_decay = to_double(k, v); }}},
      {"two_step_enn", {[](const C& c) { return std::string(c.train.two_step_enn ? "true" : "false"); },
                        [](C& c, S k, S v) { c.train.two_step_enn = to_bool(k, v); }}},
      {"check_phase_isolation",
       {[](const C& c) { return std::string(c.train.check_phase_isolation ? "true" : "false"); },
        [](C& c, S k, S v) { c.train.check_phase_isolation = to_bool(k, v); }}},
      {"classifier_hidden", {[](const C& c) { return widths(c.classifier_hidden); },
                             [](C& c, S k, S v) { c.classifier_hidden = to_widths(k, v); }}},
      {"generator_hidden", {[](const C& c) { return widths(c.generator_hidden); },
                            [](C& c, S k, S v) { c.generator_hidden = to_widths(k, v); }}},
      {"critic_hidden", {[](const C& c) { return widths(c.critic_hidden); },
                         [](C& c, S k, S v) { c.critic_hidden = to_widths(k, v); }}},
      {"latent_prior", {[](const C& c) { return models::to_string(c.latent_prior); },
                        [](C& c, S, S v) {
                          try {
                            c.latent_prior = models::parse_prior(v);
                          } catch (const std::invalid_argument& e) {
                            throw ConfigError(e.what());
                          }
                        }}},
      {"generator_init_scale", {[](const C& c) { return num(c.generator_init_scale); },
                                [](C& c, S k, S v) { c.generator_init_scale = to_double(k, v); }}},
      {"n_per_class", {[](const C& c) { return std::to_string(c.n_per_class); },
                       [](C& c, S k, S v) { c.n_per_class = to_size(k, v); }}},
      {"train_fraction", {[](const C& c) { return num(c.train_fraction); },
                          [](C& c, S k, S v) { c.train_fraction = to_double(k, v); }}},
  };
  return table;
}

}  // namespace

models::MlpSpec RunConfig::classifier_spec(bool evidential) const {
  models::MlpSpec s;
  s.input_dim = 2;
  s.hidden = classifier_hidden;
  s.output_dim = 3;
  s.head = evidential ? models::HeadKind::kEvidence : models::HeadKind::kSoftmax;
  s.activation = train.activation;
  return s;
}

models::MlpSpec RunConfig::generator_spec() const {
  models::MlpSpec s;
  s.input_dim = train.latent_dim;
  s.hidden = generator_hidden;
  s.output_dim = 2;
  s.head = models::HeadKind::kLinear;
  return s;
}

models::MlpSpec RunConfig::critic_spec() const {
  models::MlpSpec s;
  s.input_dim = 2;
  s.hidden = critic_hidden;
  s.output_dim = 1;
  s.head = models::HeadKind::kLinear;
  return s;
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + "=" + field.get(*this) + "\n";
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : serialize()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": repeated key '" + key + "'");
    }
    it->second.set(cfg, key, value);
  }
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.n_per_class == 0) throw ConfigError("n_per_class must be positive");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
  }
  if (!(cfg.generator_init_scale > 0.0)) {
    throw ConfigError("generator_init_scale must be positive");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace evuq::cli
