#include "lesionlab/align.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "lesionlab/errors.hpp"
#include "lesionlab/io.hpp"
#include "lesionlab/phenotype.hpp"

namespace lesionlab {

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("spearman inputs differ in length");
  if (x.size() < 2) throw InputError("spearman needs at least two values");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("spearman correlation is undefined for a constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<SummaryColumn> default_summary_columns() {
  SummaryColumn sem{"semantic_avg", {}}, syn{"syntactic_avg", {}}, all{"overall_avg", {}};
  for (auto p : all_phenomena()) {
    const std::string name(phenomenon_name(p));
    (is_syntactic(p) ? syn : sem).members.push_back(name);
    all.members.push_back(name);
  }
  return {sem, syn, all};
}

namespace {

/// rank[t][unit] (1-based) from each task's phenomenon ranking.
std::vector<std::map<UnitId, std::size_t>> task_ranks(const AttributionMap& map) {
  std::vector<std::map<UnitId, std::size_t>> ranks(map.tasks.size());
  for (std::size_t t = 0; t < map.tasks.size(); ++t) {
    const auto order = phenomenon_ranking(map, map.tasks[t]);
    for (std::size_t i = 0; i < order.size(); ++i) ranks[t][order[i]] = i + 1;
  }
  return ranks;
}

std::vector<UnitId> selection(std::span<const UnitId> ranking, double percent, const AttributionMap& map) {
  auto selected = select_top_fraction(ranking, percent);
  for (const auto& u : selected) map.unit_index(u);
  return selected;
}

}  // namespace

RankPercentileMatrix rank_percentile_matrix(std::span<const UnitId> phenotype_ranking, double percent,
                                            const AttributionMap& map, std::span<const SummaryColumn> summaries) {
  RankPercentileMatrix m;
  m.percent = percent;
  m.units = selection(phenotype_ranking, percent, map);
  m.tasks = map.tasks;
  const auto ranks = task_ranks(map);
  const double N = static_cast<double>(map.units.size());
  for (const auto& u : m.units) {
    std::vector<double> row;
    for (std::size_t t = 0; t < map.tasks.size(); ++t) row.push_back(static_cast<double>(ranks[t].at(u)) / N);
    m.values.push_back(std::move(row));
  }
  for (const auto& col : summaries) {
    std::vector<std::size_t> members;
    for (const auto& name : col.members) {
      auto it = std::find(map.tasks.begin(), map.tasks.end(), name);
      if (it == map.tasks.end()) throw DataError("summary column " + col.name + " references missing task " + name);
      members.push_back(static_cast<std::size_t>(it - map.tasks.begin()));
    }
    if (members.empty()) throw DataError("summary column " + col.name + " has no members");
    m.summary_names.push_back(col.name);
  }
  for (const auto& row : m.values) {
    std::vector<double> srow;
    for (const auto& col : summaries) {
      double s = 0.0;
      for (const auto& name : col.members) s += row[map.task_index(name)];
      srow.push_back(s / static_cast<double>(col.members.size()));
    }
    m.summary.push_back(std::move(srow));
  }
  return m;
}

TaskProfile task_profile(std::span<const UnitId> phenotype_ranking, double percent, const AttributionMap& map) {
  const auto m = rank_percentile_matrix(phenotype_ranking, percent, map);
  TaskProfile p{percent, m.tasks, std::vector<double>(m.tasks.size(), 0.0)};
  for (const auto& row : m.values)
    for (std::size_t t = 0; t < row.size(); ++t) p.mean_percentile[t] += row[t];
  for (auto& v : p.mean_percentile) v /= static_cast<double>(m.values.size());
  return p;
}

PSweep p_sweep(std::span<const UnitId> phenotype_ranking, const AttributionMap& map,
               std::span<const double> thresholds, double reference) {
  if (thresholds.empty()) throw InputError("p-sweep needs at least one threshold");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i - 1] < thresholds[i])) throw InputError("p-sweep thresholds must be sorted and distinct");
  auto ref = std::find(thresholds.begin(), thresholds.end(), reference);
  if (ref == thresholds.end()) throw InputError("reference threshold " + format_double(reference) + " not swept");

  PSweep sweep;
  sweep.thresholds.assign(thresholds.begin(), thresholds.end());
  sweep.reference = reference;
  for (double p : thresholds) sweep.profiles.push_back(task_profile(phenotype_ranking, p, map));
  const std::size_t n = thresholds.size();
  sweep.rho.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    sweep.rho[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      std::optional<double> r;
      try {
        r = spearman(sweep.profiles[i].mean_percentile, sweep.profiles[j].mean_percentile);
      } catch (const UndefinedCorrelation&) {
        // Constant profile (e.g. a single selected unit with tied ranks).
      }
      sweep.rho[i][j] = sweep.rho[j][i] = r;
    }
  }
  sweep.reference_row = sweep.rho[static_cast<std::size_t>(ref - thresholds.begin())];
  return sweep;
}

std::string rank_percentile_to_csv(const RankPercentileMatrix& m) {
  std::ostringstream out;
  out << "unit,phenotype_rank";
  for (const auto& t : m.tasks) out << ',' << t;
  for (const auto& s : m.summary_names) out << ',' << s;
  out << '\n';
  for (std::size_t i = 0; i < m.units.size(); ++i) {
    out << unit_label(m.units[i]) << ',' << i + 1;
    for (double v : m.values[i]) out << ',' << format_double(v);
    for (double v : m.summary[i]) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

std::string p_sweep_to_csv(const PSweep& sweep) {
  std::ostringstream out;
  out << "p";
  for (double p : sweep.thresholds) out << ',' << format_double(p);
  out << '\n';
  for (std::size_t i = 0; i < sweep.thresholds.size(); ++i) {
    out << format_double(sweep.thresholds[i]);
    for (const auto& r : sweep.rho[i]) out << ',' << (r ? format_double(*r) : "undefined");
    out << '\n';
  }
  return out.str();
}

}  // namespace lesionlab
