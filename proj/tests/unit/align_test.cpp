#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "lesionlab/align.hpp"
#include "lesionlab/errors.hpp"
#include "lesionlab/rng.hpp"
#include "lesionlab/synth.hpp"
#include "lesionlab/vocab.hpp"

namespace lesionlab {
namespace {

UnitId unit(std::uint32_t i) { return {i / 4, i % 4, UnitKind::expert}; }

std::vector<UnitId> units(std::size_t n) {
  std::vector<UnitId> out;
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(unit(i));
  return out;
}

TEST(Spearman, IdentityAndReversal) {
  const std::vector<double> x{0.3, 1.5, -2.0, 4.0, 0.9};
  std::vector<double> rev = x;
  for (double& v : rev) v = -v;
  EXPECT_DOUBLE_EQ(spearman(x, x), 1.0);
  EXPECT_DOUBLE_EQ(spearman(x, rev), -1.0);
}

TEST(Spearman, ThreeElementClosedForm) {
  // sum d^2 = 2, n = 3: 1 - 6 * 2 / (3 * 8) = 0.5
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}), 0.5, 1e-12);
}

TEST(Spearman, MatchesClosedFormOnTieFreeVectors) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.below(30);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform();
      y[i] = rng.uniform();
    }
    const auto rx = average_ranks(x), ry = average_ranks(y);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    const double nn = static_cast<double>(n);
    EXPECT_NEAR(spearman(x, y), 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0)), 1e-12);
  }
}

TEST(Spearman, TiesUseAverageRanks) {
  EXPECT_EQ(average_ranks(std::vector<double>{10, 20, 20, 30}), (std::vector<double>{1, 2.5, 2.5, 4}));
  // Pearson on average ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4): 4.5 / sqrt(4.5 * 5).
  EXPECT_NEAR(spearman(std::vector<double>{10, 20, 20, 30}, std::vector<double>{1, 2, 3, 4}), std::sqrt(0.9), 1e-12);
}

TEST(Spearman, DegenerateInputs) {
  EXPECT_THROW(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), UndefinedCorrelation);
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), InputError);
  EXPECT_THROW(spearman(std::vector<double>{1}, std::vector<double>{1}), InputError);
}

AttributionMap three_by_two() {
  AttributionMap m;
  m.tasks = {"a", "b"};
  m.units = units(3);
  m.delta = {{-0.3, -0.1, 0.0}, {0.0, -0.2, -0.1}};
  m.baseline = {1.0, 1.0};
  return m;
}

TEST(RankPercentile, EntriesAreRankOverUnitCount) {
  const AttributionMap m = three_by_two();
  const std::vector<UnitId> ranking{unit(2), unit(0), unit(1)};
  const std::vector<SummaryColumn> both{{"both", {"a", "b"}}};
  const auto mat = rank_percentile_matrix(ranking, 100.0, m, both);
  ASSERT_EQ(mat.units, ranking);
  // a: u0 1st, u1 2nd, u2 3rd.  b: u1 1st, u2 2nd, u0 3rd.
  const std::vector<std::vector<double>> expected{{1.0, 2.0 / 3}, {1.0 / 3, 1.0}, {2.0 / 3, 1.0 / 3}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(mat.values[i][j], expected[i][j], 1e-15);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(mat.summary[i][0], (expected[i][0] + expected[i][1]) / 2, 1e-15);
}

TEST(RankPercentile, FirstAndLastOfNinetySix) {
  AttributionMap m;
  m.tasks = {"t"};
  m.units = units(96);
  m.delta = {std::vector<double>(96)};
  std::iota(m.delta[0].begin(), m.delta[0].end(), 0.0);
  const auto mat = rank_percentile_matrix(std::vector<UnitId>{unit(0), unit(95)}, 100.0, m);
  EXPECT_NEAR(mat.values[0][0], 1.0 / 96, 1e-15);
  EXPECT_EQ(mat.values[1][0], 1.0);
}

TEST(RankPercentile, DefaultSummariesAverageTheirMembers) {
  AttributionMap m;
  Rng rng(4);
  for (const auto& col : default_summary_columns())
    for (const auto& t : col.members)
      if (std::find(m.tasks.begin(), m.tasks.end(), t) == m.tasks.end()) m.tasks.push_back(t);
  m.units = units(20);
  for (std::size_t t = 0; t < m.tasks.size(); ++t) {
    m.delta.emplace_back();
    for (int u = 0; u < 20; ++u) m.delta.back().push_back(rng.uniform() - 0.5);
  }
  const auto summaries = default_summary_columns();
  const auto mat = rank_percentile_matrix(m.units, 100.0, m, summaries);
  for (std::size_t i = 0; i < mat.units.size(); ++i) {
    for (std::size_t s = 0; s < summaries.size(); ++s) {
      double total = 0.0;
      for (const auto& member : summaries[s].members) {
        const auto j = static_cast<std::size_t>(std::find(mat.tasks.begin(), mat.tasks.end(), member) - mat.tasks.begin());
        total += mat.values[i][j];
      }
      EXPECT_NEAR(mat.summary[i][s], total / static_cast<double>(summaries[s].members.size()), 1e-12);
    }
    for (double v : mat.values[i]) {
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(RankPercentile, MissingUnitIsDataError) {
  const AttributionMap m = three_by_two();
  EXPECT_THROW(rank_percentile_matrix(std::vector<UnitId>{unit(7)}, 100.0, m), DataError);
}

TEST(Profile, SingleUnitEqualsItsRow) {
  const AttributionMap m = three_by_two();
  const auto p = task_profile(std::vector<UnitId>{unit(1), unit(0), unit(2)}, 1.0, m);
  EXPECT_NEAR(p.mean_percentile[0], 2.0 / 3, 1e-15);
  EXPECT_NEAR(p.mean_percentile[1], 1.0 / 3, 1e-15);
}

TEST(Profile, HandComputedMeans) {
  // Top 50% of 3 units = 2 units: u2 and u0.
  const auto p = task_profile(std::vector<UnitId>{unit(2), unit(0), unit(1)}, 50.0, three_by_two());
  EXPECT_NEAR(p.mean_percentile[0], (1.0 + 1.0 / 3) / 2, 1e-15);
  EXPECT_NEAR(p.mean_percentile[1], (2.0 / 3 + 1.0) / 2, 1e-15);
}

TEST(Profile, DuplicatedPairsLeaveProfileUnchanged) {
  const Model model = fixtures::tiny_model(Architecture::moe, 12);
  const auto tasks = encode_tasks(build_minimal_pairs(9, 5), Vocabulary::standard());
  auto doubled = tasks;
  for (auto& t : doubled) {
    const auto pairs = t.pairs;
    t.pairs.insert(t.pairs.end(), pairs.begin(), pairs.end());
  }
  const AttributionMap a = zero_ablation_sweep(model, tasks);
  const AttributionMap b = zero_ablation_sweep(model, doubled);
  const auto ranking = model.units();
  EXPECT_EQ(task_profile(ranking, 10.0, a).mean_percentile, task_profile(ranking, 10.0, b).mean_percentile);
}

TEST(PSweep, SingleThresholdIsOneByOne) {
  const std::vector<double> only{100.0};
  const PSweep s = p_sweep(std::vector<UnitId>{unit(0), unit(1), unit(2)}, three_by_two(), only, 100.0);
  ASSERT_EQ(s.rho.size(), 1u);
  EXPECT_EQ(s.rho[0][0], 1.0);
}

TEST(PSweep, ConsistentProfilesGiveAllOnes) {
  AttributionMap m;
  m.tasks = {"t1", "t2", "t3"};
  m.units = units(10);
  const std::vector<double> t2_rank{5, 6, 4, 7, 3, 8, 2, 9, 1, 10};
  m.delta.assign(3, std::vector<double>(10));
  for (std::size_t i = 0; i < 10; ++i) {
    m.delta[0][i] = static_cast<double>(i);
    m.delta[1][i] = t2_rank[i];
    m.delta[2][i] = -static_cast<double>(i);
  }
  const std::vector<double> thresholds{10.0, 20.0, 50.0};
  const PSweep s = p_sweep(m.units, m, thresholds, 20.0);
  for (const auto& row : s.rho)
    for (const auto& v : row) {
      ASSERT_TRUE(v.has_value());
      EXPECT_DOUBLE_EQ(*v, 1.0);
    }
}

TEST(PSweep, SymmetricWithUnitDiagonal) {
  AttributionMap m;
  Rng rng(8);
  m.tasks = {"a", "b", "c", "d", "e"};
  m.units = units(96);
  for (int t = 0; t < 5; ++t) {
    m.delta.emplace_back();
    for (int u = 0; u < 96; ++u) m.delta.back().push_back(std::round((rng.uniform() - 0.5) * 8) / 8);  // many ties
  }
  std::vector<UnitId> ranking = m.units;
  rng.shuffle(std::span(ranking));
  const PSweep s = p_sweep(ranking, m);
  ASSERT_EQ(s.rho.size(), kDefaultThresholds.size());
  for (std::size_t i = 0; i < s.rho.size(); ++i) {
    ASSERT_TRUE(s.rho[i][i].has_value());
    EXPECT_EQ(*s.rho[i][i], 1.0);
    for (std::size_t j = 0; j < s.rho.size(); ++j) EXPECT_EQ(s.rho[i][j], s.rho[j][i]);
  }
  EXPECT_EQ(s.reference_row, s.rho[2]);
}

TEST(PSweep, TiedProfilesAreUndefinedNotErrors) {
  AttributionMap m;
  m.tasks = {"a", "b", "c"};
  m.units = units(8);
  m.delta.assign(3, std::vector<double>(8, 0.0));  // every task ranks in inventory order
  const PSweep s = p_sweep(m.units, m);
  EXPECT_FALSE(s.reference_row[0].has_value());
  EXPECT_NE(p_sweep_to_csv(s).find("undefined"), std::string::npos);
}

TEST(PSweep, ReferenceMustBeAThreshold) {
  EXPECT_THROW(p_sweep(units(3), three_by_two(), kDefaultThresholds, 4.0), InputError);
}

}  // namespace
}  // namespace lesionlab
