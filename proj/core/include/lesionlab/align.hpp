#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lesionlab/model.hpp"
#include "lesionlab/probe.hpp"
#include "lesionlab/synth.hpp"

namespace lesionlab {

/// Average (fractional) ranks, 1-based; ties share the mean of their ranks.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks. Throws InputError on length
/// mismatch or fewer than two values, UndefinedCorrelation when either
/// input is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct SummaryColumn {
  std::string name;
  std::vector<std::string> members;
};

/// semantic / syntactic / overall averages over the registered phenomena.
std::vector<SummaryColumn> default_summary_columns();

struct RankPercentileMatrix {
  std::string phenotype;
  double percent = 0.0;
  std::vector<UnitId> units;
  std::vector<std::string> tasks;
  /// values[i][j] = rank of unit i on task j / unit count.
  std::vector<std::vector<double>> values;
  std::vector<std::string> summary_names;
  std::vector<std::vector<double>> summary;
};

/// Rows follow the phenotype ranking's top-p selection; columns are the
/// attribution map's tasks. Throws DataError for units or summary members
/// missing from the map.
RankPercentileMatrix rank_percentile_matrix(std::span<const UnitId> phenotype_ranking, double percent,
                                            const AttributionMap& map,
                                            std::span<const SummaryColumn> summaries = {});

struct TaskProfile {
  double percent = 0.0;
  std::vector<std::string> tasks;
  std::vector<double> mean_percentile;
};

TaskProfile task_profile(std::span<const UnitId> phenotype_ranking, double percent, const AttributionMap& map);

struct PSweep {
  std::vector<double> thresholds;
  /// rho[i][j]; empty optional where the correlation is undefined.
  std::vector<std::vector<std::optional<double>>> rho;
  double reference = 2.0;
  std::vector<std::optional<double>> reference_row;
  std::vector<TaskProfile> profiles;
};

inline const std::vector<double> kDefaultThresholds{0.5, 1.0, 2.0, 3.0, 5.0, 10.0};

/// Spearman correlation between task profiles at every pair of thresholds.
/// Thresholds must be sorted and distinct; the reference must be one of them.
PSweep p_sweep(std::span<const UnitId> phenotype_ranking, const AttributionMap& map,
               std::span<const double> thresholds = kDefaultThresholds, double reference = 2.0);

std::string rank_percentile_to_csv(const RankPercentileMatrix& m);
std::string p_sweep_to_csv(const PSweep& sweep);

}  // namespace lesionlab
