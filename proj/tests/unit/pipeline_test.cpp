#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <fstream>
#include <random>
#include <sstream>

#include "lesionlab/errors.hpp"
#include "lesionlab/pipeline.hpp"

namespace lesionlab {
namespace {

namespace fs = std::filesystem;

RunConfig smoke() { return load_config(fs::path(LESIONLAB_SOURCE_DIR) / "configs/smoke.ini"); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    root_ = fs::temp_directory_path() / ("lesionlab-pipeline-" + std::to_string(rd()));
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path dir(const std::string& name) const { return root_ / name; }

  fs::path root_;
};

std::size_t skipped(const std::vector<StageOutcome>& outcomes) {
  return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(), [](auto& o) { return o.skipped; }));
}

TEST(PipelineStages, NamesAndPrerequisites) {
  EXPECT_EQ(all_stages().size(), 8u);
  for (Stage s : all_stages()) EXPECT_EQ(stage_from_name(stage_name(s)), s);
  EXPECT_EQ(stage_name(Stage::gen_data), "gen-data");
  EXPECT_THROW(stage_from_name("fit"), LookupError);
  EXPECT_EQ(stage_prerequisites(Stage::probe), (std::vector<Stage>{Stage::gen_data, Stage::train}));
  EXPECT_TRUE(stage_prerequisites(Stage::gen_data).empty());
}

TEST(PipelineStages, ManifestRoundTrips) {
  RunManifest m;
  m.config_fingerprint = "abc";
  m.stages["train/dense"] = {"in", {{"checkpoints/dense.ckpt", "f00"}}, 1.5};
  const RunManifest back = RunManifest::from_json(m.to_json());
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_THROW(RunManifest::from_json("{"), DataError);
}

TEST_F(PipelineTest, ProbeBeforeTrainNamesTheMissingStage) {
  Pipeline p(smoke(), dir("run"));
  p.run(Stage::gen_data);
  try {
    p.run(Stage::probe);
    FAIL() << "expected DependencyError";
  } catch (const DependencyError& e) {
    EXPECT_EQ(e.prerequisite(), "train");
    EXPECT_NE(std::string(e.what()).find("lesionlab train"), std::string::npos);
  }
  Pipeline fresh(smoke(), dir("other"));
  try {
    fresh.run(Stage::train);
    FAIL() << "expected DependencyError";
  } catch (const DependencyError& e) {
    EXPECT_EQ(e.prerequisite(), "gen-data");
  }
}

TEST_F(PipelineTest, FullRunResumesAndIsDeterministicAcrossWorkers) {
  const auto first = Pipeline(smoke(), dir("a")).run_all();
  EXPECT_EQ(first.size(), 15u);
  EXPECT_EQ(skipped(first), 0u);

  // A fresh process sees only the directory; nothing reruns.
  const auto again = Pipeline(smoke(), dir("a")).run_all();
  EXPECT_EQ(skipped(again), again.size());

  PipelineOptions parallel;
  parallel.workers = 3;
  Pipeline(smoke(), dir("b"), parallel).run_all();
  const auto files = deterministic_artifacts(dir("a"));
  ASSERT_EQ(files, deterministic_artifacts(dir("b")));
  EXPECT_GT(files.size(), 50u);
  for (const auto& f : files) EXPECT_EQ(slurp(dir("a") / f), slurp(dir("b") / f)) << f;
  EXPECT_TRUE(std::none_of(files.begin(), files.end(), [](const fs::path& f) { return f == "manifest.json"; }));
}

TEST_F(PipelineTest, ResumeAfterPartialRun) {
  {
    Pipeline p(smoke(), dir("run"));
    p.run(Stage::gen_data);
    p.run(Stage::train);
    p.run(Stage::probe);
  }
  const auto rest = Pipeline(smoke(), dir("run")).run_all();
  // gen-data, train x2, probe x2 were already done.
  EXPECT_EQ(skipped(rest), 5u);
  EXPECT_EQ(rest.size(), 15u);
}

TEST_F(PipelineTest, TamperedArtifactIsStale) {
  Pipeline p(smoke(), dir("run"));
  p.run(Stage::gen_data);
  p.run(Stage::train);
  { std::ofstream(dir("run") / "checkpoints/dense.ckpt", std::ios::app) << "x"; }
  EXPECT_THROW(p.run(Stage::probe), StalenessError);
  // Rerunning the tampered stage repairs it.
  const auto redo = p.run(Stage::train);
  EXPECT_EQ(skipped(redo), 1u);  // moe untouched
  EXPECT_NO_THROW(p.run(Stage::probe));
}

TEST_F(PipelineTest, ChangedConfigMakesDownstreamStale) {
  {
    Pipeline p(smoke(), dir("run"));
    p.run(Stage::gen_data);
    p.run(Stage::train);
  }
  RunConfig changed = smoke();
  changed.train.optimizer.learning_rate = 0.002;
  Pipeline p(changed, dir("run"));
  EXPECT_THROW(p.run(Stage::probe), StalenessError);
  // The worker count and architecture selection never make anything stale.
  RunConfig dense_only = smoke();
  dense_only.architectures = {Architecture::dense};
  dense_only.workers = 4;
  EXPECT_NO_THROW(Pipeline(dense_only, dir("run")).run(Stage::probe));
}

TEST_F(PipelineTest, ItemBankCountsByContentNotPath) {
  Pipeline(smoke(), dir("run")).run(Stage::gen_data);
  RunConfig moved = smoke();
  fs::copy_file(moved.item_bank, dir("bank.json"));
  moved.item_bank = dir("bank.json");
  EXPECT_EQ(skipped(Pipeline(moved, dir("run")).run(Stage::gen_data)), 1u);
  { std::ofstream(dir("bank.json"), std::ios::app) << "\n"; }
  EXPECT_EQ(skipped(Pipeline(moved, dir("run")).run(Stage::gen_data)), 0u);
}

TEST_F(PipelineTest, ReportArtifactsAreWellFormed) {
  Pipeline p(smoke(), dir("run"));
  p.run_all();
  const fs::path run = dir("run");
  EXPECT_TRUE(fs::exists(run / "config.copy"));
  EXPECT_NO_THROW(parse_config(slurp(run / "config.copy")));
  for (const char* arch : {"dense", "moe"}) {
    const std::string a(arch);
    for (const char* svg : {"-broca-heatmap.svg", "-wernicke-heatmap.svg", "-psweep.svg", "-dose.svg"}) {
      const std::string text = slurp(run / "report" / (a + svg));
      EXPECT_EQ(text.rfind("<svg", 0), 0u) << a << svg;
      EXPECT_NE(text.find("</svg>"), std::string::npos);
    }
    const std::string qual = slurp(run / "report" / (a + "-qualitative.txt"));
    for (const char* row : {"intact", "broca", "wernicke", "random"}) EXPECT_NE(qual.find(row), std::string::npos);

    const auto summary = nlohmann::json::parse(slurp(run / "report" / (a + "-summary.json")));
    EXPECT_EQ(summary.at("architecture"), a);
    for (const char* cond : {"broca", "wernicke", "random"})
      for (const char* scheme : {"zeroing", "xavier"}) {
        const auto& curve = summary.at("dose").at(cond).at(scheme);
        EXPECT_EQ(curve.at("budgets"), nlohmann::json({0, 1, 2, 4}));
        EXPECT_EQ(curve.at("mean_aq").size(), 4u);
      }
    EXPECT_TRUE(summary.at("rho_vs_reference").contains("broca"));
    EXPECT_EQ(summary.at("qualitative").size(), 6u);

    const std::string dose = slurp(run / "clinic" / (a + "-dose.csv"));
    EXPECT_EQ(dose.rfind("condition,scheme,budget,seed,aq\n", 0), 0u);
    // intact + 3 conditions x 2 schemes x 3 budgets x 2 seeds
    EXPECT_EQ(std::count(dose.begin(), dose.end(), '\n'), 1 + 1 + 36);
  }
  const auto& m = p.manifest();
  EXPECT_EQ(m.stages.size(), 15u);
  for (const auto& [key, rec] : m.stages)
    for (const auto& [path, fp] : rec.artifacts) EXPECT_TRUE(fs::exists(run / path)) << key << ' ' << path;
}

}  // namespace
}  // namespace lesionlab
