#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lesionlab/config.hpp"

namespace lesionlab {

inline constexpr std::string_view kToolVersion = "lesionlab 0.1.0";

enum class Stage { gen_data, train, probe, phenotype, align, lesion, evaluate, report };

std::string_view stage_name(Stage s);
Stage stage_from_name(std::string_view name);
const std::vector<Stage>& all_stages();
/// Direct prerequisites of a stage.
std::vector<Stage> stage_prerequisites(Stage s);

struct StageRecord {
  /// Fingerprint of everything the stage consumed (config and the artifacts
  /// of its prerequisites).
  std::string inputs;
  /// Run-dir-relative path -> content fingerprint.
  std::map<std::string, std::string> artifacts;
  double seconds = 0.0;
};

struct RunManifest {
  std::string tool_version{kToolVersion};
  std::string config_fingerprint;
  /// Keyed "gen-data" or "<stage>/<arch>".
  std::map<std::string, StageRecord> stages;

  std::string to_json() const;
  static RunManifest from_json(std::string_view text);
};

struct StageOutcome {
  std::string key;
  bool skipped = false;
  double seconds = 0.0;
};

struct PipelineOptions {
  /// Overrides the config's worker count; never changes any artifact.
  std::optional<std::size_t> workers;
  /// Progress lines; silent when empty.
  std::function<void(std::string_view)> log;
};

/// Runs stages against a run directory. Every stage reads its inputs from
/// the directory, so any stage can be resumed in a fresh process.
class Pipeline {
 public:
  Pipeline(RunConfig config, std::filesystem::path run_dir, PipelineOptions options = {});

  /// Runs one stage for every configured architecture. Throws
  /// DependencyError when a prerequisite never ran and StalenessError when a
  /// prerequisite's artifacts or inputs changed since it ran. A stage whose
  /// inputs and outputs are unchanged is skipped.
  std::vector<StageOutcome> run(Stage stage);
  /// Every stage in order; completed stages are skipped.
  std::vector<StageOutcome> run_all();

  const RunManifest& manifest() const noexcept { return manifest_; }
  const RunConfig& config() const noexcept { return config_; }
  const std::filesystem::path& run_dir() const noexcept { return dir_; }

 private:
  struct Context;
  StageOutcome run_one(Stage stage, std::optional<Architecture> arch);
  std::string stage_key(Stage stage, std::optional<Architecture> arch) const;
  std::string input_fingerprint(Stage stage, std::optional<Architecture> arch) const;
  void check_prerequisites(Stage stage, std::optional<Architecture> arch) const;
  bool artifacts_intact(const StageRecord& record) const;
  void save_manifest() const;

  RunConfig config_;
  std::filesystem::path dir_;
  PipelineOptions options_;
  std::size_t workers_;
  RunManifest manifest_;
};

/// Artifacts compared by the determinism contract: every CSV, JSON, SVG and
/// text file below the run directory except the manifest (which records
/// wall-clock times).
std::vector<std::filesystem::path> deterministic_artifacts(const std::filesystem::path& run_dir);

}  // namespace lesionlab
