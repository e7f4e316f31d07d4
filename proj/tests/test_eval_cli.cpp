#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "seer/cli.hpp"
#include "seer/eval.hpp"

namespace seer {
namespace {

namespace fs = std::filesystem;

std::string temp_dir(const std::string& name) {
  std::string p = (fs::temp_directory_path() / name).string();
  fs::create_directories(p);
  return p;
}

// Small, fast study settings.
KVConfig tiny_config() {
  KVConfig cfg = KVConfig::defaults();
  cfg.set("epochs", "2");
  cfg.set("epochs_pick", "2");
  cfg.set("bc_epochs", "2");
  cfg.set("ibc_epochs", "2");
  cfg.set("k_negatives", "8");
  cfg.set("embed_dim", "16");
  cfg.set("encoder_hidden", "24");
  cfg.set("demos_push", "6");
  cfg.set("demos_pick", "6");
  cfg.set("demos_obstacle", "6");
  cfg.set("episodes", "4");
  cfg.set("multimodal_episodes", "4");
  cfg.set("max_steps", "40");
  cfg.set("n_candidates", "32");
  return cfg;
}

TEST(Config, FileParsingAndOverrides) {
  std::string path = (fs::temp_directory_path() / "seer_cfg.txt").string();
  {
    std::ofstream os(path);
    os << "# comment line\n";
    os << "epochs = 42   # trailing comment\n";
    os << "lr=0.01\n";
  }
  KVConfig cfg = KVConfig::defaults();
  cfg.load_file(path);
  EXPECT_EQ(cfg.get_int("epochs"), 42);
  EXPECT_DOUBLE_EQ(cfg.get_double("lr"), 0.01);
  // Unknown keys are rejected (typo guard).
  EXPECT_THROW(cfg.set("epocs", "1"), std::runtime_error);
  std::remove(path.c_str());
}

TEST(Config, HashCoversEveryKey) {
  KVConfig base = KVConfig::defaults();
  uint64_t h0 = base.hash();
  for (const auto& [key, value] : base.entries()) {
    KVConfig changed = base;
    changed.set(key, value + "7");
    EXPECT_NE(changed.hash(), h0) << "hash did not cover key " << key;
  }
}

TEST(Config, IntListParsing) {
  KVConfig cfg = KVConfig::defaults();
  cfg.set("scaling_counts", "5,10,15");
  std::vector<int> want = {5, 10, 15};
  EXPECT_EQ(cfg.get_int_list("scaling_counts"), want);
}

TEST(Report, FinalizeComputesExactRates) {
  ExperimentReport r;
  for (int i = 0; i < 8; ++i) {
    EpisodeOutcome o;
    o.episode = i;
    o.success = i % 2 == 0;
    o.steps = 10 * (i + 1);
    o.stop_reason = i < 3 ? "threshold-stop" : "step-limit";
    o.obstacle_contact_steps = i == 5 ? 3 : 0;
    r.outcomes.push_back(o);
  }
  finalize_report(r);
  EXPECT_EQ(r.successes, 4);
  EXPECT_DOUBLE_EQ(r.success_rate, 0.5);
  EXPECT_DOUBLE_EQ(r.mean_steps, 45.0);
  EXPECT_DOUBLE_EQ(r.threshold_stop_rate, 3.0 / 8.0);
  EXPECT_DOUBLE_EQ(r.obstacle_contact_rate, 1.0 / 8.0);
}

TEST(Report, EmptyOutcomeListIsValid) {
  ExperimentReport r;
  finalize_report(r);
  EXPECT_EQ(r.n_episodes, 0);
  EXPECT_DOUBLE_EQ(r.success_rate, 0.0);
  std::string path = (fs::temp_directory_path() / "seer_empty_report.csv").string();
  write_summary_csv(path, {r});
  std::string err;
  EXPECT_TRUE(validate_summary_csv(path, &err)) << err;
  std::remove(path.c_str());
}

TEST(Report, CsvSchemaValidation) {
  std::string path = (fs::temp_directory_path() / "seer_schema.csv").string();
  {
    std::ofstream os(path);
    os << kSummaryCsvHeader << "\nbad,row\n";
  }
  std::string err;
  EXPECT_FALSE(validate_summary_csv(path, &err));
  std::remove(path.c_str());
}

TEST(Study, ZeroEpisodesBaselineRowIsValid) {
  KVConfig cfg = tiny_config();
  ArtifactStore store(temp_dir("seer_study0"));
  auto rows = run_baseline_study({TaskKind::push}, {MethodKind::ours}, cfg, store,
                                 /*n_episodes=*/0);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_EQ(rows[0].n_episodes, 0);
  EXPECT_TRUE(rows[0].outcomes.empty());
  EXPECT_DOUBLE_EQ(rows[0].success_rate, 0.0);
  fs::remove_all(temp_dir("seer_study0"));
}

TEST(Study, ReportsAreByteIdenticalAcrossReruns) {
  KVConfig cfg = tiny_config();
  std::string dir_a = temp_dir("seer_rerun_a");
  std::string dir_b = temp_dir("seer_rerun_b");
  ArtifactStore store_a(dir_a);
  ArtifactStore store_b(dir_b);
  auto rows_a = run_baseline_study({TaskKind::push}, {MethodKind::ours, MethodKind::bc}, cfg,
                                   store_a);
  auto rows_b = run_baseline_study({TaskKind::push}, {MethodKind::ours, MethodKind::bc}, cfg,
                                   store_b);
  write_summary_csv(dir_a + "/r.csv", rows_a);
  write_summary_csv(dir_b + "/r.csv", rows_b);
  EXPECT_EQ(file_hash(dir_a + "/r.csv"), file_hash(dir_b + "/r.csv"));
  // Dataset artifacts byte-identical as well.
  EXPECT_EQ(file_hash(dir_a + "/data_push_6_1_state.jsonl"),
            file_hash(dir_b + "/data_push_6_1_state.jsonl"));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST(Study, ScalingDatasetsAreNestedPrefixes) {
  KVConfig cfg = tiny_config();
  std::string dir = temp_dir("seer_prefix");
  ArtifactStore store(dir);
  std::string small = store.dataset_path(TaskKind::push, 3, 1, ObsMode::state);
  std::string large = store.dataset_path(TaskKind::push, 6, 1, ObsMode::state);
  std::ifstream ls(large, std::ios::binary);
  std::string small_bytes;
  {
    std::ifstream ss(small, std::ios::binary);
    small_bytes.assign(std::istreambuf_iterator<char>(ss), std::istreambuf_iterator<char>());
  }
  std::string head(small_bytes.size(), '\0');
  ls.read(head.data(), static_cast<std::streamsize>(head.size()));
  EXPECT_EQ(fnv1a64(head.data(), head.size()), fnv1a64(small_bytes.data(), small_bytes.size()));
  fs::remove_all(dir);
}

TEST(Study, ZeroDemoScalingRowSucceedsAtZero) {
  KVConfig cfg = tiny_config();
  std::string dir = temp_dir("seer_scale0");
  ArtifactStore store(dir);
  auto rows = run_scaling_study(TaskKind::push, {MethodKind::ours}, {0}, cfg, store, 4);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_EQ(rows[0].n_demos, 0);
  EXPECT_DOUBLE_EQ(rows[0].success_rate, 0.0);
  fs::remove_all(dir);
}

TEST(Study, MethodCellFailureIsRecordedAndStudyContinues) {
  KVConfig cfg = tiny_config();
  cfg.set("demos_push", "0");  // empty dataset: training impossible downstream
  std::string dir = temp_dir("seer_cellfail");
  ArtifactStore store(dir);
  auto rows = run_baseline_study({TaskKind::push}, {MethodKind::ours, MethodKind::bc}, cfg, store);
  ASSERT_EQ(rows.size(), 2u);
  // ours row: training on an empty dataset yields an untrained model that
  // still evaluates (possibly 0 successes). Whatever the outcome, both rows
  // must exist and carry a status.
  for (const auto& r : rows) EXPECT_FALSE(r.status.empty());
  fs::remove_all(dir);
}

TEST(Study, FairComparisonSharesDatasetHash) {
  KVConfig cfg = tiny_config();
  std::string dir = temp_dir("seer_fair");
  ArtifactStore store(dir);
  auto rows = run_baseline_study({TaskKind::push}, {MethodKind::ours, MethodKind::bc, MethodKind::ibc},
                                 cfg, store);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].dataset_hash, rows[1].dataset_hash);
  EXPECT_EQ(rows[1].dataset_hash, rows[2].dataset_hash);
  EXPECT_NE(rows[0].dataset_hash, 0u);
  // Identical evaluation seeds across methods.
  for (size_t i = 0; i < rows[0].outcomes.size(); ++i) {
    EXPECT_EQ(rows[0].outcomes[i].seed, rows[1].outcomes[i].seed);
    EXPECT_EQ(rows[0].outcomes[i].seed, rows[2].outcomes[i].seed);
  }
  fs::remove_all(dir);
}

TEST(Cli, GenDataTrainEvalRoundTrip) {
  std::string dir = temp_dir("seer_cli_rt");
  std::string data = dir + "/d.jsonl";
  std::string model = dir + "/m.ckpt";
  std::string report = dir + "/r.csv";

  auto run = [&](std::vector<std::string> args) {
    std::vector<const char*> argv;
    argv.push_back("seer");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::dispatch(static_cast<int>(argv.size()), argv.data());
  };

  EXPECT_EQ(run({"gen-data", "--task", "push", "--episodes", "6", "--seed", "7", "--out", data}),
            0);
  EXPECT_EQ(run({"train", "--data", data, "--out", model, "--set", "epochs=2",
                 "--set", "k_negatives=8", "--set", "embed_dim=16", "--set",
                 "encoder_hidden=24"}),
            0);
  EXPECT_EQ(run({"eval", "--model", model, "--task", "push", "--episodes", "3", "--data", data,
                 "--report", report, "--set", "max_steps=30", "--set", "n_candidates=16"}),
            0);
  // Report: 3 outcome rows + summary row + header.
  std::ifstream is(report);
  int lines = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++lines;
  EXPECT_EQ(lines, 1 + 3 + 1);

  EXPECT_EQ(run({"replay", "--data", data}), 0);
  // Validation errors exit 1.
  EXPECT_EQ(run({"gen-data", "--task", "flying", "--out", data}), 1);
  // Missing file is a runtime failure: exit 2.
  EXPECT_EQ(run({"train", "--data", dir + "/missing.jsonl"}), 2);
  fs::remove_all(dir);
}

TEST(Cli, GradCheckRunsCleanly) {
  auto outcomes = cli::run_grad_checks(3);
  ASSERT_EQ(outcomes.size(), 4u);
  for (const auto& o : outcomes) {
    EXPECT_TRUE(o.ok) << o.name << " rel err " << o.report.max_rel_err;
    EXPECT_LT(o.report.max_rel_err, 1e-4) << o.name;
  }
}

TEST(Expert, EvaluateExpertIsPerfectOnSeededEpisodes) {
  KVConfig cfg = tiny_config();
  ExperimentReport r = evaluate_expert(TaskKind::obstacle_push, cfg, 10, "sanity");
  EXPECT_EQ(r.successes, 10);
  EXPECT_DOUBLE_EQ(r.success_rate, 1.0);
}

}  // namespace
}  // namespace seer
