#include "lesionlab/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lesionlab/align.hpp"
#include "lesionlab/checkpoint.hpp"
#include "lesionlab/clinic.hpp"
#include "lesionlab/errors.hpp"
#include "lesionlab/fingerprint.hpp"
#include "lesionlab/inference.hpp"
#include "lesionlab/io.hpp"
#include "lesionlab/parallel.hpp"
#include "lesionlab/phenotype.hpp"
#include "lesionlab/probe.hpp"
#include "lesionlab/svg.hpp"
#include "lesionlab/synth.hpp"

namespace lesionlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 8> kStageNames{{
    {Stage::gen_data, "gen-data"},
    {Stage::train, "train"},
    {Stage::probe, "probe"},
    {Stage::phenotype, "phenotype"},
    {Stage::align, "align"},
    {Stage::lesion, "lesion"},
    {Stage::evaluate, "evaluate"},
    {Stage::report, "report"},
}};

constexpr std::array<Phenotype, 2> kPhenotypes{Phenotype::broca, Phenotype::wernicke};

}  // namespace

std::string_view stage_name(Stage s) {
  for (const auto& [stage, name] : kStageNames)
    if (stage == s) return name;
  throw LookupError("unknown stage");
}

Stage stage_from_name(std::string_view name) {
  for (const auto& [stage, n] : kStageNames)
    if (n == name) return stage;
  throw LookupError("unknown stage '" + std::string(name) + "'");
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = [] {
    std::vector<Stage> out;
    for (const auto& [stage, name] : kStageNames) out.push_back(stage);
    return out;
  }();
  return stages;
}

std::vector<Stage> stage_prerequisites(Stage s) {
  switch (s) {
    case Stage::gen_data: return {};
    case Stage::train: return {Stage::gen_data};
    case Stage::probe: return {Stage::gen_data, Stage::train};
    case Stage::phenotype: return {Stage::gen_data, Stage::train};
    case Stage::align: return {Stage::probe, Stage::phenotype};
    case Stage::lesion: return {Stage::train, Stage::phenotype};
    case Stage::evaluate: return {Stage::gen_data, Stage::lesion};
    case Stage::report: return {Stage::align, Stage::evaluate};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::string RunManifest::to_json() const {
  json stages_json = json::object();
  for (const auto& [key, rec] : stages)
    stages_json[key] = {{"inputs", rec.inputs}, {"artifacts", rec.artifacts}, {"seconds", rec.seconds}};
  json doc = {{"tool_version", tool_version}, {"config_fingerprint", config_fingerprint}, {"stages", stages_json}};
  return doc.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    RunManifest m;
    m.tool_version = doc.at("tool_version").get<std::string>();
    m.config_fingerprint = doc.at("config_fingerprint").get<std::string>();
    for (const auto& [key, rec] : doc.at("stages").items()) {
      StageRecord r;
      r.inputs = rec.at("inputs").get<std::string>();
      r.artifacts = rec.at("artifacts").get<std::map<std::string, std::string>>();
      r.seconds = rec.at("seconds").get<double>();
      m.stages.emplace(key, std::move(r));
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed run manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Artifact helpers
// ---------------------------------------------------------------------------

namespace {

std::string lines_to_text(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) out += join_words(s) + '\n';
  return out;
}

std::vector<Sentence> text_to_lines(const std::string& text) {
  std::vector<Sentence> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(split_words(line));
  return out;
}

std::string pairs_to_csv(const PairSuites& suites) {
  std::string out = "phenomenon,good,bad\n";
  for (const auto& [p, pairs] : suites)
    for (const auto& mp : pairs)
      out += std::string(phenomenon_name(p)) + ',' + join_words(mp.good) + ',' + join_words(mp.bad) + '\n';
  return out;
}

PairSuites pairs_from_csv(const std::string& text) {
  PairSuites suites;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "phenomenon,good,bad") throw DataError("minimal pair CSV lacks its header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) throw DataError("malformed minimal pair row: " + line);
    const Phenomenon p = phenomenon_from_name(line.substr(0, a));
    suites[p].push_back({split_words(line.substr(a + 1, b - a - 1)), split_words(line.substr(b + 1)), p});
  }
  return suites;
}

std::vector<std::vector<int>> encode_all(const std::vector<Sentence>& sentences) {
  const Vocabulary& vocab = Vocabulary::standard();
  std::vector<std::vector<int>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(vocab.encode_sequence(s));
  return out;
}

std::string seed_tag(std::size_t k) { return "s" + std::to_string(k); }

std::vector<DoseRow> dose_rows_from_csv(const std::string& text) {
  std::vector<DoseRow> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream cs(line);
    std::string cell;
    while (std::getline(cs, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw DataError("malformed dose-response row: " + line);
    try {
      rows.push_back({cells[0], cells[1], std::stoull(cells[2]), std::stoull(cells[3]), std::stod(cells[4])});
    } catch (const std::logic_error&) {
      throw DataError("malformed dose-response row: " + line);
    }
  }
  return rows;
}

std::string curves_to_csv(const std::vector<DoseCurve>& curves) {
  std::string out = "condition,scheme,budget,mean_aq\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.budgets.size(); ++i)
      out += c.condition + ',' + c.scheme + ',' + std::to_string(c.budgets[i]) + ',' + format_double(c.mean_aq[i]) +
             '\n';
  return out;
}

// Canonical config text with the knobs that never change artifacts removed.
// The item bank enters fingerprints by content, so where it lives (and how
// the path was spelled) does not matter.
std::string artifact_config_text(RunConfig config) {
  config.workers = 1;
  config.architectures = {Architecture::dense, Architecture::moe};
  config.item_bank.clear();
  return config_to_ini(config);
}

}  // namespace

std::vector<fs::path> deterministic_artifacts(const fs::path& run_dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), run_dir);
    if (rel == "manifest.json" || rel.extension() == ".tmp") continue;
    out.push_back(rel);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// Per-stage state: where artifacts go and which were written.
struct Pipeline::Context {
  const Pipeline& p;
  std::map<std::string, std::string> written;

  fs::path path(const std::string& rel) const { return p.dir_ / rel; }
  void write(const std::string& rel, std::string_view content) {
    write_file_atomic(path(rel), content);
    written[rel] = Fingerprint().text(content).hex();
  }
  std::string read(const std::string& rel) const { return read_file(path(rel)); }
  void log(const std::string& line) const {
    if (p.options_.log) p.options_.log(line);
  }
};

Pipeline::Pipeline(RunConfig config, fs::path run_dir, PipelineOptions options)
    : config_(std::move(config)), dir_(std::move(run_dir)), options_(std::move(options)) {
  config_.validate();
  workers_ = options_.workers.value_or(config_.workers);
  if (workers_ == 0) throw ConfigError("workers must be >= 1");
  fs::create_directories(dir_);
  const fs::path manifest_path = dir_ / "manifest.json";
  if (fs::exists(manifest_path)) manifest_ = RunManifest::from_json(read_file(manifest_path));
  manifest_.tool_version = std::string(kToolVersion);
  manifest_.config_fingerprint = Fingerprint().text(artifact_config_text(config_)).hex();
  write_file_atomic(dir_ / "config.copy", config_to_ini(config_));
}

std::string Pipeline::stage_key(Stage stage, std::optional<Architecture> arch) const {
  std::string key(stage_name(stage));
  if (arch) key += "/" + std::string(architecture_name(*arch));
  return key;
}

bool Pipeline::artifacts_intact(const StageRecord& record) const {
  for (const auto& [rel, fp] : record.artifacts) {
    const fs::path path = dir_ / rel;
    if (!fs::exists(path)) return false;
    if (Fingerprint().text(read_file(path)).hex() != fp) return false;
  }
  return true;
}

std::string Pipeline::input_fingerprint(Stage stage, std::optional<Architecture> arch) const {
  Fingerprint fp;
  fp.text(kToolVersion).text(artifact_config_text(config_)).text(stage_key(stage, arch));
  if (stage == Stage::gen_data)
    fp.text(config_.item_bank.empty() ? std::string("generated") : file_fingerprint(config_.item_bank));
  for (Stage pre : stage_prerequisites(stage)) {
    const auto key = stage_key(pre, pre == Stage::gen_data ? std::nullopt : arch);
    auto it = manifest_.stages.find(key);
    fp.text(key);
    if (it == manifest_.stages.end()) continue;
    fp.text(it->second.inputs);
    for (const auto& [rel, afp] : it->second.artifacts) fp.text(rel).text(afp);
  }
  return fp.hex();
}

void Pipeline::check_prerequisites(Stage stage, std::optional<Architecture> arch) const {
  for (Stage pre : stage_prerequisites(stage)) {
    const auto pre_arch = pre == Stage::gen_data ? std::nullopt : arch;
    const auto key = stage_key(pre, pre_arch);
    const std::string arch_flag = arch ? " --arch " + std::string(architecture_name(*arch)) : "";
    auto it = manifest_.stages.find(key);
    if (it == manifest_.stages.end()) {
      throw DependencyError(std::string(stage_name(pre)),
                            "stage '" + stage_key(stage, arch) + "' needs '" + key + "'; run `lesionlab " +
                                std::string(stage_name(pre)) + arch_flag + "` first");
    }
    if (!artifacts_intact(it->second)) {
      throw StalenessError("artifacts of '" + key + "' changed since they were recorded; rerun `lesionlab " +
                           std::string(stage_name(pre)) + arch_flag + "`");
    }
    if (it->second.inputs != input_fingerprint(pre, pre_arch)) {
      throw StalenessError("'" + key + "' is out of date for the current config or its inputs; rerun `lesionlab " +
                           std::string(stage_name(pre)) + arch_flag + "`");
    }
  }
}

void Pipeline::save_manifest() const { write_file_atomic(dir_ / "manifest.json", manifest_.to_json()); }

std::vector<StageOutcome> Pipeline::run(Stage stage) {
  std::vector<StageOutcome> out;
  if (stage == Stage::gen_data) {
    out.push_back(run_one(stage, std::nullopt));
  } else {
    for (Architecture a : config_.architectures) out.push_back(run_one(stage, a));
  }
  return out;
}

std::vector<StageOutcome> Pipeline::run_all() {
  std::vector<StageOutcome> out;
  for (Stage s : all_stages())
    for (auto& o : run(s)) out.push_back(std::move(o));
  return out;
}

namespace {

void stage_gen_data(const RunConfig& c, auto& ctx) {
  const std::uint64_t S = c.seed;
  const ItemBank bank = c.item_bank.empty()
                            ? build_clinical_items(derive_seed(S, "gen-data", "item-bank"))
                            : item_bank_from_json(read_file(c.item_bank));
  for (const auto& item : bank.items) validate_item(item);
  ctx.write("corpora/item_bank.json", item_bank_to_json(bank));
  ctx.write("corpora/train.txt",
            lines_to_text(build_training_corpus(derive_seed(S, "gen-data", "train-corpus"), c.train_sequences)));
  ctx.write("corpora/minimal_pairs.csv",
            pairs_to_csv(build_minimal_pairs(derive_seed(S, "gen-data", "minimal-pairs"), c.pairs_per_phenomenon)));
  for (std::size_t k = 0; k < c.finetune_seeds; ++k) {
    auto [broca, wernicke] = build_subtype_corpora(derive_seed(S, "gen-data", "subtype-" + seed_tag(k)),
                                                   c.broca_utterances, c.wernicke_utterances);
    ctx.write("corpora/broca-" + seed_tag(k) + ".txt", lines_to_text(broca.utterances));
    ctx.write("corpora/wernicke-" + seed_tag(k) + ".txt", lines_to_text(wernicke.utterances));
  }
}

SubtypeCorpus load_corpus(const auto& ctx, Phenotype p, std::size_t k) {
  return {p, text_to_lines(ctx.read("corpora/" + std::string(phenotype_name(p)) + "-" + seed_tag(k) + ".txt")), k};
}

ContributionTable load_table(const auto& ctx, const std::string& arch, Phenotype p, std::size_t k) {
  const std::string stem = "phenotype/" + arch + "-" + std::string(phenotype_name(p)) + "-" + seed_tag(k);
  return contribution_from_files(ctx.read(stem + ".csv"), ctx.read(stem + ".json"));
}

}  // namespace

StageOutcome Pipeline::run_one(Stage stage, std::optional<Architecture> arch) {
  const std::string key = stage_key(stage, arch);
  check_prerequisites(stage, arch);
  const std::string inputs = input_fingerprint(stage, arch);
  if (auto it = manifest_.stages.find(key);
      it != manifest_.stages.end() && it->second.inputs == inputs && artifacts_intact(it->second)) {
    if (options_.log) options_.log(key + ": up to date");
    return {key, true, 0.0};
  }

  Context ctx{*this, {}};
  ctx.log(key + ": running");
  const auto start = std::chrono::steady_clock::now();
  const RunConfig& c = config_;
  const std::uint64_t S = c.seed;
  const std::string an = arch ? std::string(architecture_name(*arch)) : "";
  const std::string ckpt = "checkpoints/" + an + ".ckpt";

  switch (stage) {
    case Stage::gen_data:
      stage_gen_data(c, ctx);
      break;

    case Stage::train: {
      const auto sequences = encode_all(text_to_lines(ctx.read("corpora/train.txt")));
      Model model = build_model(c.model_for(*arch));
      TrainConfig tc = c.train;
      tc.seed = derive_seed(S, "train", an);
      std::string curve = "step,loss\n";
      const auto report = pretrain(model, sequences, tc, [&](std::size_t step, double loss) {
        curve += std::to_string(step) + ',' + format_double(loss) + '\n';
        if (step % 500 == 0) ctx.log(key + ": step " + std::to_string(step) + " loss " + format_double(loss));
      });
      ctx.write(ckpt, serialize_checkpoint(model));
      ctx.write("checkpoints/" + an + "-loss.csv", curve);
      ctx.log(key + ": " + std::to_string(report.steps) + " steps");
      break;
    }

    case Stage::probe: {
      const Model model = deserialize_checkpoint(ctx.read(ckpt));
      const auto tasks = encode_tasks(pairs_from_csv(ctx.read("corpora/minimal_pairs.csv")), Vocabulary::standard());
      const AttributionMap map = zero_ablation_sweep(model, tasks, SweepOptions{workers_});
      ctx.write("attribution/" + an + ".csv", attribution_to_csv(map));
      ctx.write("attribution/" + an + ".json", attribution_metadata_json(map));
      break;
    }

    case Stage::phenotype: {
      const Model base = deserialize_checkpoint(ctx.read(ckpt));
      const auto b0 = load_corpus(ctx, Phenotype::broca, 0);
      const auto w0 = load_corpus(ctx, Phenotype::wernicke, 0);
      const StyleClassifier clf =
          train_style_classifier(b0, w0, derive_seed(S, "phenotype", "classifier"), c.classifier);
      ctx.write("phenotype/" + an + "-classifier.json", clf.to_json());

      struct Job {
        std::size_t k;
        Phenotype p;
      };
      std::vector<Job> jobs;
      for (std::size_t k = 0; k < c.finetune_seeds; ++k)
        for (Phenotype p : kPhenotypes) jobs.push_back({k, p});
      std::vector<ContributionTable> tables(jobs.size());
      std::vector<ConsistencyReport> tuned(jobs.size()), base_reports(jobs.size());
      parallel_for(jobs.size(), workers_, [&](std::size_t j) {
        const auto [k, p] = jobs[j];
        const SubtypeCorpus corpus = load_corpus(ctx, p, k);
        FinetuneConfig fc;
        fc.epochs = c.finetune_epochs;
        fc.batch_size = c.finetune_batch_size;
        fc.optimizer.learning_rate = c.finetune_learning_rate;
        fc.include_router = c.include_router;
        fc.seed = derive_seed(S, "phenotype", an + "-" + std::string(phenotype_name(p)) + "-" + seed_tag(k));
        const auto sequences = encode_all(corpus.utterances);
        FinetuneResult result = finetune_with_importance(base, p, sequences, fc);
        const auto prompts =
            style_prompts(derive_seed(S, "phenotype", "style-prompts-" + seed_tag(k)), c.style_prompts, c.style_prefix);
        base_reports[j] = style_consistency(base, prompts, clf, p, c.max_new_tokens);
        tuned[j] = style_consistency(result.model, prompts, clf, p, c.max_new_tokens);
        tables[j] = std::move(result.table);
      });

      std::string style = "seed,phenotype,base_consistency,base_confidence,finetuned_consistency,"
                          "finetuned_confidence,base_empty,finetuned_empty\n";
      std::string gens = "seed,phenotype,model,prompt,text\n";
      json summary_rows = json::array();
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto [k, p] = jobs[j];
        const std::string pn(phenotype_name(p));
        const std::string stem = "phenotype/" + an + "-" + pn + "-" + seed_tag(k);
        ctx.write(stem + ".csv", contribution_to_csv(tables[j]));
        ctx.write(stem + ".json", contribution_metadata_json(tables[j]));
        const auto& b = base_reports[j];
        const auto& t = tuned[j];
        style += std::to_string(k) + ',' + pn + ',' + format_double(b.consistency) + ',' +
                 format_double(b.mean_confidence) + ',' + format_double(t.consistency) + ',' +
                 format_double(t.mean_confidence) + ',' + std::to_string(b.empty_generations) + ',' +
                 std::to_string(t.empty_generations) + '\n';
        for (std::size_t i = 0; i < t.generations.size(); ++i) {
          if (p == Phenotype::broca)  // base generations do not depend on the phenotype
            gens += std::to_string(k) + ",none,base," + std::to_string(i) + ',' + b.generations[i] + '\n';
          gens += std::to_string(k) + ',' + pn + ",finetuned," + std::to_string(i) + ',' + t.generations[i] + '\n';
        }
      }
      ctx.write("phenotype/" + an + "-style.csv", style);
      ctx.write("phenotype/" + an + "-generations.csv", gens);
      break;
    }

    case Stage::align: {
      const AttributionMap map =
          attribution_from_files(ctx.read("attribution/" + an + ".csv"), ctx.read("attribution/" + an + ".json"));
      const auto summaries = default_summary_columns();
      for (Phenotype p : kPhenotypes) {
        const std::string pn(phenotype_name(p));
        const auto ranking = phenotype_ranking(load_table(ctx, an, p, 0));
        auto matrix = rank_percentile_matrix(ranking, c.heatmap_percent, map, summaries);
        matrix.phenotype = pn;
        ctx.write("align/" + an + "-" + pn + "-matrix.csv", rank_percentile_to_csv(matrix));
        ctx.write("align/" + an + "-" + pn + "-sweep.csv",
                  p_sweep_to_csv(p_sweep(ranking, map, c.thresholds, c.reference_percent)));
      }
      break;
    }

    case Stage::lesion: {
      const Model model = deserialize_checkpoint(ctx.read(ckpt));
      std::vector<ConditionRankings> conditions;
      for (Phenotype p : kPhenotypes) {
        ConditionRankings cr{std::string(phenotype_name(p)), {}};
        for (std::size_t k = 0; k < c.finetune_seeds; ++k) cr.per_seed.push_back(phenotype_ranking(load_table(ctx, an, p, k)));
        conditions.push_back(std::move(cr));
      }
      DoseResponseConfig dc;
      dc.budgets = c.budgets;
      dc.schemes = c.schemes;
      dc.seeds = c.lesion_seeds;
      dc.seed = derive_seed(S, "lesion", an);
      ctx.write("lesions/" + an + "-plans.json", dose_jobs_to_json(dose_plans(model, conditions, dc)));
      break;
    }

    case Stage::evaluate: {
      const Model model = deserialize_checkpoint(ctx.read(ckpt));
      const ItemBank bank = item_bank_from_json(ctx.read("corpora/item_bank.json"));
      const auto jobs = dose_jobs_from_json(ctx.read("lesions/" + an + "-plans.json"));
      DoseResponseConfig dc;
      dc.wab = {c.max_new_tokens, workers_};
      dc.lesion.zero_biases = c.zero_biases;
      const auto rows = evaluate_dose(model, jobs, bank, dc);
      ctx.write("clinic/" + an + "-intact.json", scorecard_to_json(run_wab(model, bank, dc.wab)));
      ctx.write("clinic/" + an + "-dose.csv", dose_rows_to_csv(rows));
      ctx.write("clinic/" + an + "-curves.csv", curves_to_csv(dose_curves(rows)));
      break;
    }

    case Stage::report: {
      const Model model = deserialize_checkpoint(ctx.read(ckpt));
      const AttributionMap map =
          attribution_from_files(ctx.read("attribution/" + an + ".csv"), ctx.read("attribution/" + an + ".json"));
      const auto summaries = default_summary_columns();
      const std::string arch_title = an == "moe" ? "MoE" : "dense";
      LineChartSpec sweep_chart{"p-sweep robustness (" + arch_title + ")", "top-p (%)",
                                "Spearman rho vs " + format_double(c.reference_percent) + "% profile", {}, std::pair{-1.0, 1.0},
                                std::nullopt, ""};
      json summary = {{"architecture", an}};
      for (Phenotype p : kPhenotypes) {
        const std::string pn(phenotype_name(p));
        const auto ranking = phenotype_ranking(load_table(ctx, an, p, 0));
        const auto m = rank_percentile_matrix(ranking, c.heatmap_percent, map, summaries);
        HeatmapSpec hm;
        hm.title = pn + " top-" + format_double(c.heatmap_percent) + "% units (" + arch_title + ")";
        hm.cols = m.tasks;
        hm.cols.insert(hm.cols.end(), m.summary_names.begin(), m.summary_names.end());
        for (std::size_t i = 0; i < m.units.size(); ++i) {
          hm.rows.push_back(unit_label(m.units[i]));
          std::vector<std::optional<double>> row(m.values[i].begin(), m.values[i].end());
          row.insert(row.end(), m.summary[i].begin(), m.summary[i].end());
          hm.values.push_back(std::move(row));
        }
        hm.legend = "rank percentile (lower = more important)";
        ctx.write("report/" + an + "-" + pn + "-heatmap.svg", heatmap_svg(hm));

        const PSweep sw = p_sweep(ranking, map, c.thresholds, c.reference_percent);
        Series s{pn, {}, {}, p == Phenotype::wernicke};
        json rho = json::object();
        for (std::size_t i = 0; i < sw.thresholds.size(); ++i) {
          const auto& v = sw.reference_row[i];
          rho[format_double(sw.thresholds[i])] = v ? json(*v) : json("undefined");
          if (!v) continue;
          s.x.push_back(sw.thresholds[i]);
          s.y.push_back(*v);
        }
        if (!s.x.empty()) sweep_chart.series.push_back(std::move(s));
        summary["rho_vs_reference"][pn] = rho;
        summary["top_units"][pn] = json::array();
        for (const auto& u : m.units) summary["top_units"][pn].push_back(unit_label(u));
      }
      if (sweep_chart.series.empty()) sweep_chart.series.push_back({"(all undefined)", {c.reference_percent}, {1.0}, false});
      ctx.write("report/" + an + "-psweep.svg", line_chart_svg(sweep_chart));

      const auto rows = dose_rows_from_csv(ctx.read("clinic/" + an + "-dose.csv"));
      const auto curves = dose_curves(rows);
      LineChartSpec dose_chart{"AQ under progressive lesions (" + arch_title + ")", "lesioned units", "WAB-analog AQ",
                               {}, std::nullopt, kAphasiaThreshold, "aphasia threshold 93.8"};
      for (const auto& cv : curves) {
        Series s{cv.condition + " / " + cv.scheme, {}, cv.mean_aq, cv.scheme == "xavier"};
        for (auto b : cv.budgets) s.x.push_back(static_cast<double>(b));
        dose_chart.series.push_back(std::move(s));
        summary["dose"][cv.condition][cv.scheme] = {{"budgets", cv.budgets}, {"mean_aq", cv.mean_aq}};
      }
      ctx.write("report/" + an + "-dose.svg", line_chart_svg(dose_chart));

      // Generations for one prompt under size-matched lesions.
      const Vocabulary& vocab = Vocabulary::standard();
      std::vector<int> prompt{vocab.bos()};
      for (int id : vocab.encode(c.qualitative_prompt)) prompt.push_back(id);
      auto answer = [&](const Model& m) {
        const auto out = generate(m, prompt, c.max_new_tokens);
        const std::string text = vocab.decode(std::span(out).subspan(prompt.size()));
        return text.empty() ? std::string("(no output)") : text;
      };
      const auto jobs = dose_jobs_from_json(ctx.read("lesions/" + an + "-plans.json"));
      std::string qual = "architecture: " + an + "\nprompt: " + c.qualitative_prompt + "\nlesion size: " +
                         std::to_string(c.qualitative_budget) + " units (first seed)\n\n";
      qual += "condition  scheme   units          output\n";
      qual += "intact     -        -              " + answer(model) + "\n";
      json qual_json = json::array();
      for (LesionScheme scheme : c.schemes) {
        for (const char* condition : {"broca", "wernicke", "random"}) {
          auto it = std::find_if(jobs.begin(), jobs.end(), [&](const DoseJob& j) {
            return j.row.condition == condition && j.row.scheme == scheme_name(scheme) &&
                   j.row.budget == c.qualitative_budget;
          });
          if (it == jobs.end()) continue;
          std::string units;
          for (const auto& u : it->plan.targets) units += (units.empty() ? "" : "+") + unit_label(u);
          const std::string text = answer(apply_lesion(model, it->plan, LesionOptions{c.zero_biases}));
          std::string line = condition;
          line.resize(11, ' ');
          line += std::string(scheme_name(scheme));
          line.resize(20, ' ');
          line += units;
          line.resize(std::max<std::size_t>(line.size() + 1, 35), ' ');
          qual += line + text + "\n";
          qual_json.push_back({{"condition", condition}, {"scheme", scheme_name(scheme)}, {"units", units}, {"output", text}});
        }
      }
      ctx.write("report/" + an + "-qualitative.txt", qual);
      summary["qualitative"] = qual_json;
      summary["intact_aq"] = json::parse(ctx.read("clinic/" + an + "-intact.json")).at("aq");
      ctx.write("report/" + an + "-summary.json", summary.dump(2) + "\n");
      break;
    }
  }

  StageRecord record{inputs, std::move(ctx.written),
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
  const double seconds = record.seconds;
  manifest_.stages[key] = std::move(record);
  save_manifest();
  if (options_.log) options_.log(key + ": done in " + format_double(std::round(seconds * 10.0) / 10.0) + " s");
  return {key, false, seconds};
}

}  // namespace lesionlab
