#include <gtest/gtest.h>

#include <map>

#include "fixtures.hpp"
#include "lesionlab/errors.hpp"
#include "lesionlab/probe.hpp"
#include "lesionlab/synth.hpp"
#include "lesionlab/vocab.hpp"

namespace lesionlab {
namespace {

TEST(TaskAccuracy, TiesCountAsIncorrect) {
  const Task t = fixtures::agreement_task();
  EXPECT_EQ(task_accuracy([](std::span<const int>) { return -1.0; }, t), 0.0);
}

TEST(TaskAccuracy, OracleScorerIsPerfect) {
  const Task t = fixtures::agreement_task();
  std::set<std::vector<int>> good;
  for (const auto& p : t.pairs) good.insert(p.first);
  auto oracle = [&](std::span<const int> s) { return good.contains({s.begin(), s.end()}) ? 0.0 : -1.0; };
  EXPECT_EQ(task_accuracy(oracle, t), 1.0);
}

TEST(TaskAccuracy, HandBuiltBigramScorer) {
  // Mean bigram log-prob; unseen bigrams score -4.
  const std::map<std::pair<int, int>, double> logp{{{1, 10}, -1.0}, {{10, 20}, -0.5}, {{10, 21}, -2.0},
                                                   {{11, 22}, -3.0}, {{11, 23}, -1.0}, {{12, 24}, -1.0},
                                                   {{12, 25}, -1.0}, {{13, 26}, -0.2}};
  auto scorer = [&](std::span<const int> s) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      auto it = logp.find({s[i], s[i + 1]});
      total += it == logp.end() ? -4.0 : it->second;
    }
    return total / static_cast<double>(s.size() - 1);
  };
  Task t{"fixture", {}};
  t.pairs.push_back({{1, 10, 20}, {1, 10, 21}});  // (-1 - 0.5)/2 = -0.75 vs (-1 - 2)/2 = -1.5  -> correct
  t.pairs.push_back({{11, 22}, {11, 23}});        // -3 vs -1                                   -> wrong
  t.pairs.push_back({{12, 24}, {12, 25}});        // -1 vs -1                                   -> tie, wrong
  t.pairs.push_back({{13, 26}, {13, 27}});        // -0.2 vs -4                                 -> correct
  EXPECT_DOUBLE_EQ(task_accuracy(scorer, t), 0.5);
  t.pairs[1] = {{11, 23}, {11, 22}};              // now correct
  EXPECT_DOUBLE_EQ(task_accuracy(scorer, t), 0.75);
}

TEST(TaskAccuracy, EmptyTaskIsAnInputError) {
  EXPECT_THROW(task_accuracy([](std::span<const int>) { return 0.0; }, Task{"empty", {}}), InputError);
}

TEST(Sweep, TwoExpertFixtureMatchesBruteForce) {
  const Model m = fixtures::agreement_model();
  const Task t = fixtures::agreement_task();
  // Brute force with the independent reference forward pass.
  auto reference_accuracy = [&](bool with_expert) {
    std::size_t correct = 0;
    for (const auto& [good, bad] : t.pairs)
      if (fixtures::reference_avg_log_prob(m, good, with_expert) > fixtures::reference_avg_log_prob(m, bad, with_expert))
        ++correct;
    return static_cast<double>(correct) / static_cast<double>(t.pairs.size());
  };
  ASSERT_EQ(reference_accuracy(true), 1.0);
  ASSERT_EQ(reference_accuracy(false), 0.5);

  const std::vector<Task> tasks{t};
  const AttributionMap map = zero_ablation_sweep(m, tasks);
  EXPECT_EQ(map.baseline[0], 1.0);
  EXPECT_EQ(map.delta[0][map.unit_index({0, 0, UnitKind::expert})], -0.5);
  // Expert 1 is never routed: no causal path, so exactly zero.
  EXPECT_EQ(map.delta[0][map.unit_index({0, 1, UnitKind::expert})], 0.0);
  EXPECT_EQ(phenomenon_ranking(map, "agreement").front(), (UnitId{0, 0, UnitKind::expert}));
}

std::vector<Task> small_tasks() {
  return encode_tasks(build_minimal_pairs(3, 6), Vocabulary::standard());
}

TEST(Sweep, AgreesWithDirectOverrideScoring) {
  const Model m = fixtures::tiny_model(Architecture::moe, 31);
  const auto tasks = small_tasks();
  const AttributionMap map = zero_ablation_sweep(m, tasks, {2});
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    EXPECT_EQ(map.baseline[t], task_accuracy(m, tasks[t]));
    for (std::size_t u = 0; u < map.units.size(); ++u)
      EXPECT_EQ(map.delta[t][u], task_accuracy(m, tasks[t], {map.units[u]}) - map.baseline[t]);
  }
}

TEST(Sweep, TaskOrderAndWorkerCountDoNotMatter) {
  const Model m = fixtures::tiny_model(Architecture::dense, 32);
  auto tasks = small_tasks();
  const AttributionMap a = zero_ablation_sweep(m, tasks, {1});
  std::reverse(tasks.begin(), tasks.end());
  const AttributionMap b = zero_ablation_sweep(m, tasks, {3});
  EXPECT_EQ(a.task_fingerprint, b.task_fingerprint);
  for (const auto& name : a.tasks) EXPECT_EQ(a.delta[a.task_index(name)], b.delta[b.task_index(name)]) << name;
}

TEST(Ranking, AllEqualDeltasFollowInventoryOrder) {
  AttributionMap map;
  map.tasks = {"t"};
  map.units = {{1, 0, UnitKind::expert}, {0, 1, UnitKind::expert}, {0, 0, UnitKind::expert}};
  map.delta = {{0.0, 0.0, 0.0}};
  const std::vector<UnitId> expected{{0, 0, UnitKind::expert}, {0, 1, UnitKind::expert}, {1, 0, UnitKind::expert}};
  EXPECT_EQ(phenomenon_ranking(map, "t"), expected);
}

TEST(Ranking, StorageOrderDoesNotMatter) {
  AttributionMap map;
  map.tasks = {"t"};
  map.units = {{0, 0, UnitKind::expert}, {0, 1, UnitKind::expert}, {1, 0, UnitKind::expert}, {1, 1, UnitKind::expert}};
  map.delta = {{-0.1, 0.2, -0.3, -0.1}};
  const auto ranking = phenomenon_ranking(map, "t");
  std::swap(map.units[0], map.units[3]);
  std::swap(map.delta[0][0], map.delta[0][3]);
  std::swap(map.units[1], map.units[2]);
  std::swap(map.delta[0][1], map.delta[0][2]);
  EXPECT_EQ(phenomenon_ranking(map, "t"), ranking);
  EXPECT_EQ(ranking.front(), (UnitId{1, 0, UnitKind::expert}));
  EXPECT_THROW(phenomenon_ranking(map, "missing"), LookupError);
}

TEST(Persistence, CsvAndMetadataRoundTrip) {
  const Model m = fixtures::tiny_model(Architecture::moe, 4);
  const auto tasks = small_tasks();
  const AttributionMap map = zero_ablation_sweep(m, tasks);
  const AttributionMap back = attribution_from_files(attribution_to_csv(map), attribution_metadata_json(map));
  EXPECT_EQ(back.tasks, map.tasks);
  EXPECT_EQ(back.units, map.units);
  EXPECT_EQ(back.delta, map.delta);
  EXPECT_EQ(back.baseline, map.baseline);
  EXPECT_EQ(back.model_fingerprint, map.model_fingerprint);
  EXPECT_THROW(attribution_from_files("unit,t\nL0.E0,abc\n", attribution_metadata_json(map)), DataError);
}

}  // namespace
}  // namespace lesionlab
