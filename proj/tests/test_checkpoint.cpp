#include "seer/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "seer/net.hpp"

namespace seer {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(21);
  DenseNet net({4, 8, 3}, rng);
  ParameterSet params;
  params.add_net("enc", net);

  Checkpoint ckpt;
  ckpt.meta["kind"] = "test";
  ckpt.meta["embed_dim"] = "3";
  ckpt.params = snapshot_params(params);
  std::string path = temp_path("seer_ckpt_roundtrip.ckpt");
  save_checkpoint(path, ckpt);

  Checkpoint loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.format_version, kCheckpointVersion);
  EXPECT_EQ(loaded.meta_at("kind"), "test");
  EXPECT_EQ(loaded.meta_int("embed_dim"), 3);
  ASSERT_EQ(loaded.params.size(), params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(loaded.params[i].name, params[i].name);
    // Bit-exact comparison, not approximate.
    ASSERT_EQ(loaded.params[i].value.size(), params[i].value->size());
    EXPECT_EQ(std::memcmp(loaded.params[i].value.data(), params[i].value->data(),
                          sizeof(double) * static_cast<size_t>(params[i].value->size())),
              0);
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, OptimizerSectionOptional) {
  Rng rng(22);
  DenseNet net({2, 2}, rng);
  ParameterSet params;
  params.add_net("n", net);

  Checkpoint ckpt;
  ckpt.params = snapshot_params(params);
  ckpt.has_optimizer = true;
  ckpt.optimizer.push_back({"adam.step", Tensor2D::Constant(1, 1, 17.0)});
  std::string path = temp_path("seer_ckpt_opt.ckpt");
  save_checkpoint(path, ckpt);
  Checkpoint loaded = load_checkpoint(path);
  ASSERT_TRUE(loaded.has_optimizer);
  ASSERT_EQ(loaded.optimizer.size(), 1u);
  EXPECT_DOUBLE_EQ(loaded.optimizer[0].value(0, 0), 17.0);
  std::remove(path.c_str());
}

TEST(Checkpoint, RestoreIntoParameterSet) {
  Rng rng(23);
  DenseNet a({3, 2}, rng);
  DenseNet b({3, 2}, rng);
  ParameterSet pa, pb;
  pa.add_net("net", a);
  pb.add_net("net", b);
  EXPECT_NE(pa.content_hash(), pb.content_hash());

  Checkpoint ckpt;
  ckpt.params = snapshot_params(pa);
  std::string path = temp_path("seer_ckpt_restore.ckpt");
  save_checkpoint(path, ckpt);
  restore_params(pb, load_checkpoint(path));
  EXPECT_EQ(pa.content_hash(), pb.content_hash());
  std::remove(path.c_str());
}

TEST(Checkpoint, RejectsBadFiles) {
  std::string path = temp_path("seer_ckpt_bad.ckpt");
  {
    std::ofstream os(path, std::ios::binary);
    os << "not a checkpoint at all";
  }
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  EXPECT_THROW(load_checkpoint(temp_path("seer_ckpt_missing.ckpt")), std::runtime_error);
  std::remove(path.c_str());
}

}  // namespace
}  // namespace seer
