#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lesionlab/lesion.hpp"
#include "lesionlab/model.hpp"
#include "lesionlab/synth.hpp"

namespace lesionlab {

inline constexpr double kAphasiaThreshold = 93.8;
/// Subtest maxima that make a perfect battery score exactly 100.
inline constexpr std::array<double, 4> kSubtestMaximum{20.0, 120.0, 100.0, 40.0};

enum class Diagnosis { normal, aphasic };
std::string_view diagnosis_name(Diagnosis d);

/// (SS + C/12 + R/10 + N/4) * 2. Throws InputError for scores outside [0, max].
double aphasia_quotient(double ss, double c, double r, double n);
/// Aphasic iff aq < 93.8; the boundary itself is normal.
Diagnosis diagnose(double aq);

/// Lower-case, trim, collapse internal whitespace.
std::string normalize_output(std::string_view text);
std::size_t token_edit_distance(std::span<const std::string> a, std::span<const std::string> b);

/// Points for a model output. For multiple-choice items the output is the
/// selected option (empty when the choice was tied).
double score_item(std::string_view output, const ClinicalItem& item);

struct ItemResponse {
  std::string id;
  Subtest subtest = Subtest::SS;
  std::string output;
  double points = 0.0;
  double max_points = 0.0;
};

struct WABScorecard {
  std::array<double, 4> raw{};
  std::array<double, 4> raw_max{};
  std::array<double, 4> rescaled{};
  double aq = 0.0;
  Diagnosis diagnosis = Diagnosis::aphasic;
  std::uint64_t model_fingerprint = 0;
  std::string bank_version;
  std::vector<ItemResponse> responses;
};

struct WabOptions {
  std::size_t max_new_tokens = 12;
  std::size_t workers = 1;
};

/// The model's answer to one item: greedy continuation of "<bos> prompt",
/// or the best-scoring option for multiple choice.
std::string respond(const Model& model, const ClinicalItem& item, const WabOptions& options = {});

/// Scores persisted outputs (bank order) into a scorecard.
WABScorecard score_responses(const ItemBank& bank, std::span<const std::string> outputs);
WABScorecard run_wab(const Model& model, const ItemBank& bank, const WabOptions& options = {});

std::string scorecard_to_json(const WABScorecard& card);

// ---------------------------------------------------------------------------
// Dose-response
// ---------------------------------------------------------------------------

struct DoseRow {
  std::string condition;  // intact | <phenotype> | random
  std::string scheme;     // none | zeroing | xavier
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  double aq = 0.0;
};

struct DoseResponseConfig {
  std::vector<std::size_t> budgets{1, 2, 4, 8, 16};
  std::vector<LesionScheme> schemes{LesionScheme::zeroing, LesionScheme::xavier};
  std::size_t seeds = 5;
  std::uint64_t seed = 0;
  WabOptions wab{};
  LesionOptions lesion{};
};

/// Targeted condition with one ranking per seed, or a single ranking shared
/// by all seeds.
struct ConditionRankings {
  std::string name;
  std::vector<std::vector<UnitId>> per_seed;
};

/// One evaluation of the dose-response grid; `replicas` rows are emitted for
/// it (a deterministic cell stands for every seed).
struct DoseJob {
  DoseRow row;
  LesionPlan plan;
  std::size_t replicas = 1;
};

/// Intact baseline plus every (condition, scheme, budget, seed) cell. A
/// shared ranking under zeroing is deterministic and planned once.
std::vector<DoseJob> dose_plans(const Model& model, std::span<const ConditionRankings> conditions,
                                const DoseResponseConfig& config);
std::vector<DoseRow> evaluate_dose(const Model& model, std::span<const DoseJob> jobs, const ItemBank& bank,
                                   const DoseResponseConfig& config);
std::vector<DoseRow> dose_response(const Model& model, std::span<const ConditionRankings> conditions,
                                   const ItemBank& bank, const DoseResponseConfig& config);

std::string dose_jobs_to_json(std::span<const DoseJob> jobs);
std::vector<DoseJob> dose_jobs_from_json(std::string_view text);

struct DoseCurve {
  std::string condition;
  std::string scheme;
  std::vector<std::size_t> budgets;  // starts with 0 (intact)
  std::vector<double> mean_aq;
};

/// Seed-averaged curves, each prefixed with the intact baseline.
std::vector<DoseCurve> dose_curves(std::span<const DoseRow> rows);

std::string dose_rows_to_csv(std::span<const DoseRow> rows);

}  // namespace lesionlab
