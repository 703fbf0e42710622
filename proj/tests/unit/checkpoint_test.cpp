#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <string>

#include "evuq/data/rng.hpp"
#include "evuq/models/checkpoint.hpp"
#include "support/temp_dir.hpp"

namespace evuq::models {
namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
}

ad::AdamState touched_adam(const ad::ParameterSet& ps, data::Rng& rng) {
  ad::AdamConfig cfg;
  cfg.lr = 3e-6;
  cfg.weight_decay = 1e-4;
  auto s = ad::AdamState::zeros_like(ps, cfg);
  s.step = 17;
  for (auto* group : {&s.m, &s.v}) {
    for (auto& t : *group) {
      for (auto& x : t.data()) x = static_cast<Real>(rng.uniform(0.0, 1.0));
    }
  }
  return s;
}

ModelBundle full_bundle() {
  data::Rng rng(21, "init");
  ModelBundle b;
  b.model_kind = "wenn";
  b.config_hash = "0123abcd";
  b.iteration = 412;
  b.classifier.emplace(MlpSpec{2, {8, 8}, 3, HeadKind::kEvidence, EvidenceActivation::kSoftplus},
                       rng);
  b.generator.emplace(MlpSpec{4, {8}, 2, HeadKind::kLinear}, LatentPrior::kGaussian, rng);
  b.discriminator.emplace(MlpSpec{2, {8}, 1, HeadKind::kLinear}, rng);
  b.classifier_opt = touched_adam(b.classifier->params(), rng);
  b.generator_opt = touched_adam(b.generator->params(), rng);
  b.discriminator_opt = touched_adam(b.discriminator->params(), rng);
  return b;
}

void expect_same_adam(const ad::AdamState& a, const ad::AdamState& b) {
  EXPECT_EQ(a.step, b.step);
  EXPECT_EQ(a.config.lr, b.config.lr);
  EXPECT_EQ(a.config.beta2, b.config.beta2);
  EXPECT_EQ(a.config.weight_decay, b.config.weight_decay);
  EXPECT_EQ(a.m, b.m);
  EXPECT_EQ(a.v, b.v);
}

TEST(Archive, RoundTrip) {
  testing::TempDir dir;
  Archive a;
  a.meta["note"] = "two words";
  a.meta["empty"] = "";
  a.tensors.push_back({"w", ad::Tensor::matrix(2, 3, {1, -2, 3.5f, 1e-30f, 0, 7})});
  a.tensors.push_back({"b", ad::Tensor::matrix(1, 1, {0.25f})});
  save_archive(dir / "a.ckpt", a);
  const Archive back = load_archive(dir / "a.ckpt");
  EXPECT_EQ(back.meta, a.meta);
  ASSERT_EQ(back.tensors.size(), 2u);
  EXPECT_EQ(*back.find("w"), a.tensors[0].value);
  EXPECT_EQ(*back.find("b"), a.tensors[1].value);
  EXPECT_EQ(back.find("missing"), nullptr);
}

TEST(Archive, RejectsUnserializableNames) {
  testing::TempDir dir;
  Archive a;
  a.meta["k"] = "line\nbreak";
  EXPECT_THROW(save_archive(dir / "x.ckpt", a), CheckpointError);
  Archive b;
  b.tensors.push_back({"has space", ad::Tensor::zeros(1, 1)});
  EXPECT_THROW(save_archive(dir / "y.ckpt", b), CheckpointError);
}

TEST(Checkpoint, BundleRoundTripIsExact) {
  testing::TempDir dir;
  const ModelBundle b = full_bundle();
  save_checkpoint(dir / "m.ckpt", b);
  const ModelBundle back = load_checkpoint(dir / "m.ckpt", std::string("0123abcd"));
  EXPECT_EQ(back.model_kind, "wenn");
  EXPECT_EQ(back.iteration, 412);
  ASSERT_TRUE(back.classifier && back.generator && back.discriminator);
  EXPECT_EQ(back.classifier->spec(), b.classifier->spec());
  EXPECT_TRUE(back.classifier->params() == b.classifier->params());
  EXPECT_TRUE(back.generator->params() == b.generator->params());
  EXPECT_EQ(back.generator->prior(), LatentPrior::kGaussian);
  EXPECT_TRUE(back.discriminator->params() == b.discriminator->params());
  ASSERT_TRUE(back.classifier_opt && back.generator_opt && back.discriminator_opt);
  expect_same_adam(*back.classifier_opt, *b.classifier_opt);
  expect_same_adam(*back.generator_opt, *b.generator_opt);
  expect_same_adam(*back.discriminator_opt, *b.discriminator_opt);
}

TEST(Checkpoint, SavingTwiceGivesIdenticalBytes) {
  testing::TempDir dir;
  const ModelBundle b = full_bundle();
  save_checkpoint(dir / "a.ckpt", b);
  save_checkpoint(dir / "b.ckpt", b);
  EXPECT_EQ(read_bytes(dir / "a.ckpt"), read_bytes(dir / "b.ckpt"));
}

TEST(Checkpoint, ClassifierOnlyBundle) {
  testing::TempDir dir;
  ModelBundle b;
  b.model_kind = "l2";
  b.config_hash = "h";
  b.classifier.emplace(MlpSpec{2, {4}, 3, HeadKind::kSoftmax});
  save_checkpoint(dir / "c.ckpt", b);
  const auto back = load_checkpoint(dir / "c.ckpt");
  EXPECT_TRUE(back.classifier.has_value());
  EXPECT_FALSE(back.classifier_opt.has_value());
  EXPECT_FALSE(back.generator.has_value());
  EXPECT_FALSE(back.discriminator.has_value());
}

TEST(Checkpoint, HashMismatchWarns) {
  testing::TempDir dir;
  save_checkpoint(dir / "m.ckpt", full_bundle());
  std::vector<std::string> warnings;
  const auto back = load_checkpoint(dir / "m.ckpt", std::string("ffff"), &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("0123abcd"), std::string::npos);
  EXPECT_NE(warnings[0].find("ffff"), std::string::npos);
  EXPECT_EQ(back.config_hash, "0123abcd");
  warnings.clear();
  load_checkpoint(dir / "m.ckpt", std::string("0123abcd"), &warnings);
  EXPECT_TRUE(warnings.empty());
}

TEST(Checkpoint, MissingFile) {
  testing::TempDir dir;
  EXPECT_THROW(load_checkpoint(dir / "nope.ckpt"), CheckpointIoError);
}

TEST(Checkpoint, TruncatedPayload) {
  testing::TempDir dir;
  save_checkpoint(dir / "m.ckpt", full_bundle());
  const std::string bytes = read_bytes(dir / "m.ckpt");
  write_bytes(dir / "m.ckpt", bytes.substr(0, bytes.size() - 10));
  EXPECT_THROW(load_checkpoint(dir / "m.ckpt"), TruncatedPayloadError);
}

TEST(Checkpoint, CorruptManifest) {
  testing::TempDir dir;
  save_checkpoint(dir / "m.ckpt", full_bundle());
  const std::string bytes = read_bytes(dir / "m.ckpt");

  write_bytes(dir / "bad_header.ckpt", "not-a-checkpoint\n" + bytes);
  EXPECT_THROW(load_checkpoint(dir / "bad_header.ckpt"), CorruptManifestError);

  write_bytes(dir / "trailing.ckpt", bytes + "xx");
  EXPECT_THROW(load_checkpoint(dir / "trailing.ckpt"), CorruptManifestError);

  std::string renamed = bytes;
  const auto pos = renamed.find("meta model_kind");
  ASSERT_NE(pos, std::string::npos);
  renamed.replace(pos, 15, "meta model_kine");
  write_bytes(dir / "renamed.ckpt", renamed);
  EXPECT_THROW(load_checkpoint(dir / "renamed.ckpt"), CorruptManifestError);
}

TEST(Checkpoint, ShapeMismatchIsReported) {
  testing::TempDir dir;
  Archive a;
  a.meta["model_kind"] = "enn";
  a.meta["config_hash"] = "h";
  a.meta["iteration"] = "0";
  a.meta["classifier.spec"] = MlpSpec{2, {4}, 3}.describe();
  a.tensors.push_back({"classifier/layer0.weight", ad::Tensor::zeros(3, 4)});
  a.tensors.push_back({"classifier/layer0.bias", ad::Tensor::zeros(1, 4)});
  a.tensors.push_back({"classifier/layer1.weight", ad::Tensor::zeros(4, 3)});
  a.tensors.push_back({"classifier/layer1.bias", ad::Tensor::zeros(1, 3)});
  save_archive(dir / "s.ckpt", a);
  EXPECT_THROW(load_checkpoint(dir / "s.ckpt"), CheckpointShapeError);

  a.tensors.erase(a.tensors.begin());
  save_archive(dir / "s.ckpt", a);
  EXPECT_THROW(load_checkpoint(dir / "s.ckpt"), CheckpointShapeError);
}

}  // namespace
}  // namespace evuq::models
