#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lesionlab/model.hpp"

namespace lesionlab {

enum class LesionScheme { zeroing, xavier, random_zeroing, random_xavier };
std::string_view scheme_name(LesionScheme s);
LesionScheme scheme_from_name(std::string_view name);
bool is_random_scheme(LesionScheme s);
/// zeroing for zeroing / random-zeroing, xavier otherwise.
bool is_xavier_scheme(LesionScheme s);

/// Lesion size: an absolute unit count or a percentage of the inventory.
struct Budget {
  std::optional<std::size_t> count;
  std::optional<double> percent;

  static Budget units(std::size_t n) { return {n, std::nullopt}; }
  static Budget fraction(double p) { return {std::nullopt, p}; }
  std::size_t resolve(std::size_t inventory) const;
  std::string describe() const;
};

struct LesionPlan {
  LesionScheme scheme = LesionScheme::zeroing;
  std::vector<UnitId> targets;
  Budget budget;
  std::uint64_t seed = 0;
  std::string source_fingerprint;
};

/// Nested plans over the ranking prefix, one per budget.
std::vector<LesionPlan> make_progressive_plans(std::span<const UnitId> ranking, std::span<const Budget> budgets,
                                               LesionScheme scheme, std::uint64_t seed = 0,
                                               std::string source_fingerprint = {});

/// Uniform sample without replacement; deterministic per seed.
LesionPlan make_random_plan(std::span<const UnitId> inventory, Budget budget, std::uint64_t seed,
                            LesionScheme scheme = LesionScheme::random_zeroing);

struct LesionOptions {
  /// Zero biases of re-initialized units (otherwise they are left intact).
  bool zero_biases = true;
};

/// Returns a lesioned copy. Zeroing adds the targets to the permanent
/// output mask; Xavier overwrites every weight entry of each target with
/// Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)) of the full matrix.
Model apply_lesion(const Model& model, const LesionPlan& plan, const LesionOptions& options = {});

std::string lesion_plan_to_json(const LesionPlan& plan);
LesionPlan lesion_plan_from_json(std::string_view text);

}  // namespace lesionlab
