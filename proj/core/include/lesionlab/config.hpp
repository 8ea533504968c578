#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lesionlab/clinic.hpp"
#include "lesionlab/lesion.hpp"
#include "lesionlab/model.hpp"
#include "lesionlab/phenotype.hpp"
#include "lesionlab/train.hpp"

namespace lesionlab {

/// The bundled pretraining recipe: 5 epochs of AdamW at 3e-3 with a short
/// warm-up and cosine decay to a tenth of the peak.
TrainConfig default_pretraining();

/// Everything a run needs. Every stochastic step draws its seed from
/// derive_seed(seed, stage, entity); nothing else feeds randomness.
struct RunConfig {
  // [run]
  std::uint64_t seed = 1234;
  std::vector<Architecture> architectures{Architecture::dense, Architecture::moe};
  std::size_t workers = 1;
  /// Resolved against the config file's directory; empty means the bank is
  /// generated from the seed.
  std::filesystem::path item_bank;

  // [data]
  std::size_t train_sequences = 20000;
  std::size_t pairs_per_phenomenon = 100;
  std::size_t broca_utterances = 939;
  std::size_t wernicke_utterances = 189;
  std::size_t style_prompts = 40;
  std::size_t style_prefix = 2;

  // [model] (vocab size and init seed are filled in per architecture)
  ModelConfig model{};

  // [train]
  TrainConfig train = default_pretraining();

  // [finetune]
  std::size_t finetune_epochs = 1;
  std::size_t finetune_batch_size = 8;
  double finetune_learning_rate = 1e-3;
  std::size_t finetune_seeds = 5;
  bool include_router = false;
  ClassifierOptions classifier{};

  // [align]
  std::vector<double> thresholds{0.5, 1.0, 2.0, 3.0, 5.0, 10.0};
  double reference_percent = 2.0;
  double heatmap_percent = 2.0;

  // [lesion]
  std::vector<std::size_t> budgets{1, 2, 4, 8, 16};
  std::vector<LesionScheme> schemes{LesionScheme::zeroing, LesionScheme::xavier};
  std::size_t lesion_seeds = 5;
  bool zero_biases = true;
  std::size_t max_new_tokens = 12;
  std::size_t qualitative_budget = 2;
  std::string qualitative_prompt = "how are you today ?";

  /// Model configuration for one architecture, seeded from the run seed.
  ModelConfig model_for(Architecture a) const;
  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

/// Sectioned key = value text; unknown sections or keys are errors.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text with every key spelled out; parse_config round-trips it.
std::string config_to_ini(const RunConfig& config);

}  // namespace lesionlab
