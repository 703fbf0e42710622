#include "evuq/models/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "evuq/data/csv.hpp"

namespace evuq::models {
namespace {

constexpr const char* kMagic = "evuq-checkpoint 1";

void put_le32(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float get_le32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

std::size_t parse_size(const std::string& token, const std::string& line) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(token, &pos);
  } catch (const std::exception&) {
    throw CorruptManifestError("bad number in manifest line '" + line + "'");
  }
  if (pos != token.size() || token.front() == '-') {
    throw CorruptManifestError("bad number in manifest line '" + line + "'");
  }
  return static_cast<std::size_t>(v);
}

void add_params(Archive& a, const std::string& prefix, const ad::ParameterSet& ps) {
  for (const auto& p : ps) a.tensors.push_back({prefix + "/" + p.name, p.value});
}

void add_adam(Archive& a, const std::string& prefix, const ad::ParameterSet& ps,
              const ad::AdamState& s) {
  a.meta[prefix + ".step"] = std::to_string(s.step);
  a.meta[prefix + ".lr"] = data::format_double(s.config.lr);
  a.meta[prefix + ".beta1"] = data::format_double(s.config.beta1);
  a.meta[prefix + ".beta2"] = data::format_double(s.config.beta2);
  a.meta[prefix + ".eps"] = data::format_double(s.config.eps);
  a.meta[prefix + ".weight_decay"] = data::format_double(s.config.weight_decay);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    a.tensors.push_back({prefix + ".m/" + ps[i].name, s.m[i]});
    a.tensors.push_back({prefix + ".v/" + ps[i].name, s.v[i]});
  }
}

const ad::Tensor& require_tensor(const Archive& a, const std::string& name,
                                 const ad::Shape& shape) {
  const ad::Tensor* t = a.find(name);
  if (!t) throw CheckpointShapeError("checkpoint lacks tensor " + name);
  if (t->shape() != shape) {
    throw CheckpointShapeError("tensor " + name + " has shape " +
                               ad::to_string(t->shape()) + ", model expects " +
                               ad::to_string(shape));
  }
  return *t;
}

void load_params(const Archive& a, const std::string& prefix, ad::ParameterSet& ps) {
  for (auto& p : ps) p.value = require_tensor(a, prefix + "/" + p.name, p.value.shape());
}

const std::string& require_meta(const Archive& a, const std::string& key) {
  auto it = a.meta.find(key);
  if (it == a.meta.end()) throw CorruptManifestError("missing meta key " + key);
  return it->second;
}

double meta_double(const Archive& a, const std::string& key) {
  try {
    return std::stod(require_meta(a, key));
  } catch (const std::invalid_argument&) {
    throw CorruptManifestError("bad value for meta key " + key);
  }
}

std::optional<ad::AdamState> load_adam(const Archive& a, const std::string& prefix,
                                       const ad::ParameterSet& ps) {
  if (!a.meta.count(prefix + ".step")) return std::nullopt;
  ad::AdamConfig cfg;
  cfg.lr = meta_double(a, prefix + ".lr");
  cfg.beta1 = meta_double(a, prefix + ".beta1");
  cfg.beta2 = meta_double(a, prefix + ".beta2");
  cfg.eps = meta_double(a, prefix + ".eps");
  cfg.weight_decay = meta_double(a, prefix + ".weight_decay");
  ad::AdamState s = ad::AdamState::zeros_like(ps, cfg);
  s.step = std::stoll(require_meta(a, prefix + ".step"));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    s.m[i] = require_tensor(a, prefix + ".m/" + ps[i].name, ps[i].value.shape());
    s.v[i] = require_tensor(a, prefix + ".v/" + ps[i].name, ps[i].value.shape());
  }
  return s;
}

MlpSpec spec_from_meta(const Archive& a, const std::string& key) {
  try {
    return parse_spec(require_meta(a, key));
  } catch (const std::invalid_argument& e) {
    throw CorruptManifestError("bad network spec under " + key + ": " + e.what());
  }
}

}  // namespace

const ad::Tensor* Archive::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

void save_archive(const std::filesystem::path& path, const Archive& archive) {
  std::ostringstream manifest;
  manifest << kMagic << '\n';
  for (const auto& [key, value] : archive.meta) {
    if (key.find_first_of(" \n") != std::string::npos ||
        value.find('\n') != std::string::npos) {
      throw CheckpointError("meta entries must be single-line, keys space-free");
    }
    manifest << "meta " << key << ' ' << value << '\n';
  }
  std::string payload;
  for (const auto& t : archive.tensors) {
    if (t.name.find_first_of(" \n") != std::string::npos) {
      throw CheckpointError("tensor names must not contain whitespace");
    }
    manifest << "tensor " << t.name << ' ' << t.value.rank();
    for (std::size_t d : t.value.shape()) manifest << ' ' << d;
    manifest << ' ' << payload.size() << ' ' << t.value.size() << '\n';
    for (Real v : t.value.data()) put_le32(payload, static_cast<float>(v));
  }
  manifest << "payload " << payload.size() << '\n';

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointIoError("cannot write " + tmp.string());
    const std::string head = manifest.str();
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw CheckpointIoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointIoError("cannot move checkpoint into " + path.string());
}

Archive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointIoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());

  Archive archive;
  struct Entry {
    std::string name;
    ad::Shape shape;
    std::size_t offset;
    std::size_t count;
  };
  std::vector<Entry> entries;
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) return false;
    line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return true;
  };

  std::string line;
  if (!next_line(line) || line != kMagic) {
    throw CorruptManifestError("missing checkpoint header in " + path.string());
  }
  std::optional<std::size_t> payload_size;
  while (next_line(line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls >> std::ws, value);
      if (key.empty()) throw CorruptManifestError("empty meta key");
      archive.meta[key] = value;
    } else if (kind == "tensor") {
      std::vector<std::string> tokens;
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      if (tokens.size() < 4) throw CorruptManifestError("short tensor line '" + line + "'");
      Entry e;
      e.name = tokens[0];
      const std::size_t rank = parse_size(tokens[1], line);
      if (rank > 2 || tokens.size() != 4 + rank) {
        throw CorruptManifestError("bad tensor rank in '" + line + "'");
      }
      std::size_t expected = 1;
      for (std::size_t d = 0; d < rank; ++d) {
        e.shape.push_back(parse_size(tokens[2 + d], line));
        expected *= e.shape.back();
      }
      e.offset = parse_size(tokens[2 + rank], line);
      e.count = parse_size(tokens[3 + rank], line);
      if (e.count != expected) {
        throw CorruptManifestError("element count disagrees with shape in '" + line + "'");
      }
      entries.push_back(std::move(e));
    } else if (kind == "payload") {
      std::string tok;
      ls >> tok;
      payload_size = parse_size(tok, line);
      break;
    } else {
      throw CorruptManifestError("unknown manifest line '" + line + "'");
    }
  }
  if (!payload_size) throw CorruptManifestError("manifest has no payload line");
  const std::size_t available = bytes.size() - pos;
  if (available < *payload_size) {
    throw TruncatedPayloadError("payload holds " + std::to_string(available) +
                                " bytes, manifest declares " +
                                std::to_string(*payload_size));
  }
  if (available > *payload_size) {
    throw CorruptManifestError("trailing bytes after the declared payload");
  }
  const auto* base = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (auto& e : entries) {
    if (e.offset % 4 != 0 || e.offset + 4 * e.count > *payload_size) {
      throw CorruptManifestError("tensor " + e.name + " lies outside the payload");
    }
    std::vector<Real> values(e.count);
    for (std::size_t i = 0; i < e.count; ++i) {
      values[i] = static_cast<Real>(get_le32(base + e.offset + 4 * i));
    }
    archive.tensors.push_back({e.name, ad::Tensor(e.shape, std::move(values))});
  }
  return archive;
}

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& b) {
  Archive a;
  a.meta["model_kind"] = b.model_kind;
  a.meta["config_hash"] = b.config_hash;
  a.meta["iteration"] = std::to_string(b.iteration);
  if (b.classifier) {
    a.meta["classifier.spec"] = b.classifier->spec().describe();
    add_params(a, "classifier", b.classifier->params());
    if (b.classifier_opt) add_adam(a, "classifier.opt", b.classifier->params(), *b.classifier_opt);
  }
  if (b.generator) {
    a.meta["generator.spec"] = b.generator->spec().describe();
    a.meta["generator.prior"] = to_string(b.generator->prior());
    add_params(a, "generator", b.generator->params());
    if (b.generator_opt) add_adam(a, "generator.opt", b.generator->params(), *b.generator_opt);
  }
  if (b.discriminator) {
    a.meta["discriminator.spec"] = b.discriminator->spec().describe();
    add_params(a, "discriminator", b.discriminator->params());
    if (b.discriminator_opt) {
      add_adam(a, "discriminator.opt", b.discriminator->params(), *b.discriminator_opt);
    }
  }
  save_archive(path, a);
}

ModelBundle load_checkpoint(const std::filesystem::path& path,
                            const std::optional<std::string>& expected_hash,
                            std::vector<std::string>* warnings) {
  const Archive a = load_archive(path);
  ModelBundle b;
  b.model_kind = require_meta(a, "model_kind");
  b.config_hash = require_meta(a, "config_hash");
  try {
    b.iteration = std::stoll(require_meta(a, "iteration"));
  } catch (const std::invalid_argument&) {
    throw CorruptManifestError("bad iteration counter");
  }
  if (expected_hash && *expected_hash != b.config_hash) {
    const std::string msg = "warning: checkpoint " + path.string() +
                            " was written with config hash " + b.config_hash +
                            ", expected " + *expected_hash;
    std::cerr << msg << '\n';
    if (warnings) warnings->push_back(msg);
  }
  if (a.meta.count("classifier.spec")) {
    b.classifier.emplace(spec_from_meta(a, "classifier.spec"));
    load_params(a, "classifier", b.classifier->params());
    b.classifier_opt = load_adam(a, "classifier.opt", b.classifier->params());
  }
  if (a.meta.count("generator.spec")) {
    b.generator.emplace(spec_from_meta(a, "generator.spec"),
                        parse_prior(require_meta(a, "generator.prior")));
    load_params(a, "generator", b.generator->params());
    b.generator_opt = load_adam(a, "generator.opt", b.generator->params());
  }
  if (a.meta.count("discriminator.spec")) {
    b.discriminator.emplace(spec_from_meta(a, "discriminator.spec"));
    load_params(a, "discriminator", b.discriminator->params());
    b.discriminator_opt = load_adam(a, "discriminator.opt", b.discriminator->params());
  }
  return b;
}

}  // namespace evuq::models
