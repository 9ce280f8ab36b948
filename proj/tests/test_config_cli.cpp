#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hades/hades.hpp"
#include "reference.hpp"

using namespace hades;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hades_cli_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

CliConfig tiny(const std::filesystem::path& out) {
  CliConfig cfg = parse_config(
      "oracle = nk:2,20,1,1\n"
      "rounds = 3\n"
      "queries_per_round = 6\n"
      "ensemble_size = 2\n"
      "hmc.chains = 8\n"
      "model.hidden_width = 16\n");
  cfg.out_dir = out.string();
  return cfg;
}

std::vector<nlohmann::json> json_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace

TEST(Config, DefaultsMatchDocumentedValues) {
  CliConfig cfg;
  EXPECT_EQ(cfg.run.hmc.epsilon, 0.1);
  EXPECT_EQ(cfg.run.hmc.trajectory_length, 16);
  EXPECT_EQ(cfg.run.hmc.chains, 128);
  EXPECT_EQ(cfg.run.train.learning_rate, 1e-3);
  EXPECT_EQ(cfg.run.train.patience, 3);
  EXPECT_EQ(cfg.run.ensemble_size, 4);
  EXPECT_EQ(cfg.run.model.hidden_width, 64u);
  EXPECT_EQ(cfg.run.rounds, 10);
  EXPECT_EQ(cfg.run.queries_per_round, 100);
}

TEST(Config, RoundTrip) {
  CliConfig cfg = parse_config(
      "# comment\n"
      "hmc.epsilon = 0.037\n"
      "hmc.barriers = clamp\n"
      "proposals = random\n"
      "ablation.structure = false\n"
      "oracle = lookup:/data/gb1.tsv\n"
      "oracle.unknown_policy = zero\n"
      "task.wild_type = VDGV\n"
      "task.mutable_positions = 38,39,40,53\n"
      "seeds = 1,2,3\n"
      "bench.k_grid = 16,32\n"
      "train.learning_rate = 0.1\n");
  std::string text = serialize_config(cfg);
  CliConfig again = parse_config(text);
  EXPECT_EQ(serialize_config(again), text);
  EXPECT_EQ(again.run.hmc.epsilon, 0.037);
  EXPECT_EQ(again.run.train.learning_rate, 0.1);
  EXPECT_EQ(again.run.hmc.barriers, BarrierMode::clamp);
  EXPECT_EQ(again.run.proposals, ProposalMode::random);
  EXPECT_FALSE(again.run.use_structure);
  EXPECT_EQ(again.oracle.kind, OracleSpec::Kind::lookup);
  EXPECT_EQ(again.oracle.path, "/data/gb1.tsv");
  EXPECT_EQ(again.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(again.mutable_positions, (std::vector<std::size_t>{38, 39, 40, 53}));
  EXPECT_EQ(serialize_config(parse_config(serialize_config(CliConfig{}))), serialize_config(CliConfig{}));
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_config("rounds = 3\nhmc.epsilom = 0.1\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("hmc.epsilom"), std::string::npos);
    EXPECT_NE(msg.find(":2:"), std::string::npos);
  }
  EXPECT_THROW(parse_config("rounds = three\n"), Error);
  EXPECT_THROW(parse_config("rounds\n"), Error);
  EXPECT_THROW(parse_config("hmc.barriers = sometimes\n"), Error);
  EXPECT_THROW(parse_config("oracle = grid:4\n"), Error);
}

TEST(Config, LandscapeShapeChecks) {
  CliConfig cfg = parse_config("oracle = nk:3,20,1,1\ntask.wild_type = VDGV\n");
  auto task = make_task(cfg);
  EXPECT_THROW(make_landscape(cfg, task), Error);
  cfg = parse_config("oracle = nk:4,20,1,1\ntask.wild_type = VDGV\n");
  task = make_task(cfg);
  auto land = make_landscape(cfg, task);
  EXPECT_EQ(land->structure_distance(task.wild_type), 0.0);
  EXPECT_EQ(make_task(parse_config("oracle = nk:3,20,1,1\n")).wild_type, Sequence({0, 0, 0}));
}

TEST(Config, SampleConfigFileLoads) {
  auto cfg = load_config(HADES_SOURCE_DIR "/configs/desk_nk.cfg");
  EXPECT_EQ(cfg.run.queries_per_round, 16);
  EXPECT_EQ(cfg.oracle.sites, 2u);
}

TEST(Commands, RunSingleSeedWritesReport) {
  auto dir = scratch("run1");
  CliConfig cfg = tiny(dir);
  std::ostringstream log;
  EXPECT_EQ(cmd_run(cfg, log), 0);
  std::ifstream rounds(dir / "rounds.jsonl");
  std::stringstream ss;
  ss << rounds.rdbuf();
  auto lines = json_lines(ss.str());
  ASSERT_EQ(lines.size(), 3u);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    EXPECT_EQ(lines[i]["round"], i + 1);
    EXPECT_EQ(lines[i]["queried_count"], 6);
  }
  std::ifstream sj(dir / "summary.json");
  auto summary = nlohmann::json::parse(sj);
  EXPECT_EQ(summary["per_round_max"].size(), 3u);
  EXPECT_EQ(summary["metrics"]["cumulative_max_fitness"], summary["per_round_max"].back());
  EXPECT_TRUE(std::filesystem::exists(dir / "member_0.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "member_1.ckpt"));
  std::filesystem::remove_all(dir);
}

TEST(Commands, RunManySeedsWritesAggregate) {
  auto dir = scratch("runN");
  CliConfig cfg = tiny(dir);
  cfg.run.rounds = 2;
  set_config_value(cfg, "seeds", "1,2,3");
  std::ostringstream log;
  EXPECT_EQ(cmd_run(cfg, log), 0);
  for (int s = 1; s <= 3; ++s) EXPECT_TRUE(std::filesystem::exists(dir / ("seed_" + std::to_string(s)) / "summary.json"));
  std::ifstream in(dir / "aggregate_summary.json");
  auto agg = nlohmann::json::parse(in);
  EXPECT_EQ(agg["seeds"].size(), 3u);
  EXPECT_EQ(agg["metrics"]["seeds"], 3);
  std::filesystem::remove_all(dir);
}

TEST(Commands, InvalidConfigFails) {
  auto dir = scratch("bad");
  CliConfig cfg = tiny(dir);
  cfg.seeds.clear();
  std::ostringstream log;
  EXPECT_THROW(cmd_run(cfg, log), Error);
}

TEST(Commands, BenchTableShapeAndDeterminism) {
  auto dir = scratch("bench");
  CliConfig cfg = tiny(dir);
  cfg.run.rounds = 2;
  set_config_value(cfg, "seeds", "1,2,3");
  set_config_value(cfg, "bench.k_grid", "4,8");
  auto a = run_bench(cfg);
  ASSERT_EQ(a.size(), 4u);  // 2 methods x 2 K values
  for (const auto& c : a) EXPECT_EQ(c.summary.seeds, 3u);
  std::string table = bench_table(a);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
  EXPECT_EQ(bench_table(run_bench(cfg)), table);
  std::ostringstream log;
  EXPECT_EQ(cmd_bench(cfg, log), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "bench.tsv"));
  std::filesystem::remove_all(dir);
}

TEST(Commands, NoBarriersRunsWithClamping) {
  auto dir = scratch("novb");
  CliConfig cfg = tiny(dir);
  cfg.run.hmc.barriers = BarrierMode::clamp;
  cfg.run.hmc.epsilon = 2.0;
  std::ostringstream log;
  EXPECT_EQ(cmd_run(cfg, log), 0);
  std::filesystem::remove_all(dir);
}

TEST(Commands, SampleTraceBookkeeping) {
  CliConfig cfg;
  cfg.run.hmc.trajectory_length = 12;
  std::ostringstream out;
  EXPECT_EQ(cmd_sample(cfg, "VDGV", "", out), 0);
  auto lines = json_lines(out.str());
  ASSERT_EQ(lines.size(), 12u);
  for (std::size_t t = 0; t < lines.size(); ++t) {
    const auto& j = lines[t];
    EXPECT_EQ(j["t"], t);
    if (j["barrier_overflow"]) continue;
    EXPECT_NEAR(j["H_before"].get<double>(), j["U_before"].get<double>() + j["K_before"].get<double>(), 1e-9);
    EXPECT_NEAR(j["H_after"].get<double>(), j["U_after"].get<double>() + j["K_after"].get<double>(), 1e-9);
    EXPECT_EQ(j["sequence"].get<std::string>().size(), 4u);
  }
  EXPECT_THROW(cmd_sample(cfg, "VDXV", "", out), Error);
}

TEST(Commands, SampleWithConstantCheckpointAcceptsAll) {
  auto dir = scratch("sample");
  std::filesystem::create_directories(dir);
  auto path = dir / "flat.ckpt";
  {
    std::ofstream ck(path);
    reference::constant_model(4, 20, 0.2).save(ck);
  }
  CliConfig cfg;
  std::ostringstream out;
  EXPECT_EQ(cmd_sample(cfg, "VDGV", path.string(), out), 0);
  auto lines = json_lines(out.str());
  ASSERT_EQ(lines.size(), 16u);
  for (const auto& j : lines) EXPECT_TRUE(j["accepted"].get<bool>());
  EXPECT_THROW(cmd_sample(cfg, "VDG", path.string(), out), Error);
  std::filesystem::remove_all(dir);
}
