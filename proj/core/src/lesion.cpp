#include "lesionlab/lesion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "lesionlab/errors.hpp"
#include "lesionlab/fingerprint.hpp"
#include "lesionlab/io.hpp"
#include "lesionlab/phenotype.hpp"
#include "lesionlab/rng.hpp"

namespace lesionlab {

using nlohmann::json;

std::string_view scheme_name(LesionScheme s) {
  switch (s) {
    case LesionScheme::zeroing: return "zeroing";
    case LesionScheme::xavier: return "xavier";
    case LesionScheme::random_zeroing: return "random-zeroing";
    case LesionScheme::random_xavier: return "random-xavier";
  }
  return "?";
}

LesionScheme scheme_from_name(std::string_view name) {
  for (auto s : {LesionScheme::zeroing, LesionScheme::xavier, LesionScheme::random_zeroing,
                 LesionScheme::random_xavier}) {
    if (scheme_name(s) == name) return s;
  }
  throw ConfigError("unknown lesion scheme '" + std::string(name) + "'");
}

bool is_random_scheme(LesionScheme s) {
  return s == LesionScheme::random_zeroing || s == LesionScheme::random_xavier;
}

bool is_xavier_scheme(LesionScheme s) { return s == LesionScheme::xavier || s == LesionScheme::random_xavier; }

std::size_t Budget::resolve(std::size_t inventory) const {
  std::size_t n = 0;
  if (count) {
    n = *count;
  } else if (percent) {
    n = *percent == 0.0 ? 0 : top_fraction_count(inventory, *percent);
  } else {
    throw ConfigError("budget needs a count or a percentage");
  }
  if (n > inventory) {
    throw InputError("lesion budget " + std::to_string(n) + " exceeds inventory of " + std::to_string(inventory));
  }
  return n;
}

std::string Budget::describe() const {
  if (count) return std::to_string(*count) + " units";
  if (percent) return format_double(*percent) + "%";
  return "unset";
}

std::vector<LesionPlan> make_progressive_plans(std::span<const UnitId> ranking, std::span<const Budget> budgets,
                                               LesionScheme scheme, std::uint64_t seed,
                                               std::string source_fingerprint) {
  std::vector<LesionPlan> plans;
  std::size_t previous = 0;
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    const std::size_t n = budgets[i].resolve(ranking.size());
    if (i > 0 && n <= previous) throw InputError("progressive budgets must be strictly increasing");
    previous = n;
    plans.push_back({scheme,
                     {ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(n)},
                     budgets[i],
                     seed,
                     source_fingerprint});
  }
  return plans;
}

LesionPlan make_random_plan(std::span<const UnitId> inventory, Budget budget, std::uint64_t seed,
                            LesionScheme scheme) {
  const std::size_t n = budget.resolve(inventory.size());
  std::vector<UnitId> pool(inventory.begin(), inventory.end());
  Rng rng(seed);
  rng.shuffle(std::span(pool));
  pool.resize(n);
  return {scheme, std::move(pool), budget, seed, "random"};
}

Model apply_lesion(const Model& model, const LesionPlan& plan, const LesionOptions& options) {
  std::set<UnitId> seen;
  for (const auto& u : plan.targets) {
    if (!model.has_unit(u)) throw LookupError("lesion target " + unit_label(u) + " is not a unit of this model");
    if (!seen.insert(u).second) throw InputError("duplicate lesion target " + unit_label(u));
  }
  Model out = model;
  if (!is_xavier_scheme(plan.scheme)) {
    for (const auto& u : plan.targets) out.mask_unit(u);
    return out;
  }
  ParameterStore& ps = out.params();
  for (const auto& u : plan.targets) {
    Rng rng(derive_seed(plan.seed, "xavier", unit_label(u)));
    for (const auto& slice : unit_parameters(out, u)) {
      Tensor& t = ps.tensor(slice.param);
      if (t.rank() >= 2) {
        const double a = xavier_bound(t.rows(), t.cols());
        slice.for_each(t, [&](std::size_t i) { t[i] = rng.uniform_open(-a, a); });
      } else if (options.zero_biases) {
        slice.for_each(t, [&](std::size_t i) { t[i] = 0.0; });
      }
    }
  }
  return out;
}

std::string lesion_plan_to_json(const LesionPlan& plan) {
  json targets = json::array();
  for (const auto& u : plan.targets) targets.push_back(unit_label(u));
  json budget = json::object();
  if (plan.budget.count) budget["count"] = *plan.budget.count;
  if (plan.budget.percent) budget["percent"] = *plan.budget.percent;
  json doc = {{"scheme", scheme_name(plan.scheme)},
              {"targets", targets},
              {"budget", budget},
              {"seed", plan.seed},
              {"source_fingerprint", plan.source_fingerprint}};
  return doc.dump(2) + "\n";
}

LesionPlan lesion_plan_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    LesionPlan plan;
    plan.scheme = scheme_from_name(doc.at("scheme").get<std::string>());
    for (const auto& t : doc.at("targets")) plan.targets.push_back(parse_unit_label(t.get<std::string>()));
    const auto& b = doc.at("budget");
    if (b.contains("count")) plan.budget.count = b.at("count").get<std::size_t>();
    if (b.contains("percent")) plan.budget.percent = b.at("percent").get<double>();
    plan.seed = doc.at("seed");
    plan.source_fingerprint = doc.at("source_fingerprint");
    return plan;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed lesion plan: ") + e.what());
  }
}

}  // namespace lesionlab
