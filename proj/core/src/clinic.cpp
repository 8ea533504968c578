#include "lesionlab/clinic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "lesionlab/errors.hpp"
#include "lesionlab/fingerprint.hpp"
#include "lesionlab/inference.hpp"
#include "lesionlab/io.hpp"
#include "lesionlab/parallel.hpp"

namespace lesionlab {

using nlohmann::json;

std::string_view diagnosis_name(Diagnosis d) { return d == Diagnosis::normal ? "normal" : "aphasic"; }

double aphasia_quotient(double ss, double c, double r, double n) {
  const std::array<double, 4> scores{ss, c, r, n};
  for (std::size_t s = 0; s < 4; ++s) {
    if (!(scores[s] >= 0.0 && scores[s] <= kSubtestMaximum[s])) {
      throw InputError(std::string(subtest_name(static_cast<Subtest>(s))) + " score " + format_double(scores[s]) +
                       " outside [0, " + format_double(kSubtestMaximum[s]) + "]");
    }
  }
  return (ss + c / 12.0 + r / 10.0 + n / 4.0) * 2.0;
}

Diagnosis diagnose(double aq) { return aq < kAphasiaThreshold ? Diagnosis::aphasic : Diagnosis::normal; }

std::string normalize_output(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::size_t token_edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

namespace {

bool contains(const Sentence& words, const std::string& w) {
  return std::find(words.begin(), words.end(), w) != words.end();
}

double speech_points(const Sentence& words, const SpeechKey& key) {
  if (words.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& k : key.keywords)
    if (contains(words, k)) ++hits;
  const double coverage = key.keywords.empty() ? 1.0 : static_cast<double>(hits) / key.keywords.size();
  const double band = words.size() >= key.min_tokens && words.size() <= key.max_tokens ? 1.0 : 0.0;
  const double ttr = static_cast<double>(std::set<std::string>(words.begin(), words.end()).size()) / words.size();
  return 0.5 * coverage + 0.25 * band + 0.25 * ttr;
}

}  // namespace

double score_item(std::string_view output, const ClinicalItem& item) {
  const Sentence words = split_words(normalize_output(output));
  const double max = item.max_points;
  return std::visit(
      [&](const auto& key) -> double {
        using K = std::decay_t<decltype(key)>;
        if constexpr (std::is_same_v<K, RepetitionKey>) {
          const Sentence target = split_words(normalize_output(key.target));
          const std::size_t longest = std::max(words.size(), target.size());
          if (longest == 0) return max;
          return max * (1.0 - static_cast<double>(token_edit_distance(words, target)) / longest);
        } else if constexpr (std::is_same_v<K, NamingKey>) {
          return contains(words, normalize_output(key.target)) ? max : 0.0;
        } else if constexpr (std::is_same_v<K, ChoiceKey>) {
          return words.size() == 1 && words[0] == normalize_output(key.options.at(key.answer)) ? max : 0.0;
        } else {
          return max * speech_points(words, key);
        }
      },
      item.key);
}

namespace {

std::vector<int> prompt_ids(const ClinicalItem& item) {
  const Vocabulary& vocab = Vocabulary::standard();
  std::vector<int> ids{vocab.bos()};
  for (int id : vocab.encode(item.prompt)) ids.push_back(id);
  return ids;
}

std::size_t subtest_index(Subtest s) { return static_cast<std::size_t>(s); }

}  // namespace

std::string respond(const Model& model, const ClinicalItem& item, const WabOptions& options) {
  const Vocabulary& vocab = Vocabulary::standard();
  const std::vector<int> prompt = prompt_ids(item);
  if (const auto* choice = std::get_if<ChoiceKey>(&item.key)) {
    // Mean log-probability of each option's tokens after the prompt.
    double best = -INFINITY;
    std::optional<std::size_t> pick;
    for (std::size_t o = 0; o < choice->options.size(); ++o) {
      std::vector<int> seq = prompt;
      const auto option = vocab.encode(choice->options[o]);
      seq.insert(seq.end(), option.begin(), option.end());
      const ForwardTrace tr = trace_sequence(model, seq);
      double sum = 0.0;
      for (std::size_t i = tr.log_probs.size() - option.size(); i < tr.log_probs.size(); ++i) sum += tr.log_probs[i];
      const double score = sum / static_cast<double>(option.size());
      if (score > best) {
        best = score;
        pick = o;
      } else if (score == best) {
        pick.reset();  // ties count as no answer
      }
    }
    return pick ? choice->options[*pick] : std::string();
  }
  const auto out = generate(model, prompt, options.max_new_tokens);
  return vocab.decode(std::span(out).subspan(prompt.size()));
}

WABScorecard score_responses(const ItemBank& bank, std::span<const std::string> outputs) {
  if (outputs.size() != bank.items.size())
    throw InputError("expected " + std::to_string(bank.items.size()) + " responses, got " +
                     std::to_string(outputs.size()));
  WABScorecard card;
  card.bank_version = bank.version;
  for (std::size_t i = 0; i < bank.items.size(); ++i) {
    const ClinicalItem& item = bank.items[i];
    const double points = score_item(outputs[i], item);
    const std::size_t s = subtest_index(item.subtest);
    card.raw[s] += points;
    card.raw_max[s] += item.max_points;
    card.responses.push_back({item.id, item.subtest, outputs[i], points, item.max_points});
  }
  for (std::size_t s = 0; s < 4; ++s) {
    if (card.raw_max[s] <= 0.0)
      throw ConfigError("item bank has no " + std::string(subtest_name(static_cast<Subtest>(s))) + " items");
    card.rescaled[s] = card.raw[s] / card.raw_max[s] * kSubtestMaximum[s];
  }
  card.aq = aphasia_quotient(card.rescaled[0], card.rescaled[1], card.rescaled[2], card.rescaled[3]);
  card.diagnosis = diagnose(card.aq);
  return card;
}

WABScorecard run_wab(const Model& model, const ItemBank& bank, const WabOptions& options) {
  for (const auto& item : bank.items) validate_item(item);
  std::vector<std::string> outputs(bank.items.size());
  parallel_for(bank.items.size(), options.workers,
               [&](std::size_t i) { outputs[i] = respond(model, bank.items[i], options); });
  WABScorecard card = score_responses(bank, outputs);
  card.model_fingerprint = model.fingerprint();
  return card;
}

std::string scorecard_to_json(const WABScorecard& card) {
  json subtests = json::object();
  for (std::size_t s = 0; s < 4; ++s) {
    subtests[std::string(subtest_name(static_cast<Subtest>(s)))] = {
        {"raw", card.raw[s]}, {"raw_max", card.raw_max[s]}, {"score", card.rescaled[s]}, {"max", kSubtestMaximum[s]}};
  }
  json responses = json::array();
  for (const auto& r : card.responses)
    responses.push_back({{"id", r.id},
                         {"subtest", subtest_name(r.subtest)},
                         {"output", r.output},
                         {"points", r.points},
                         {"max_points", r.max_points}});
  json doc = {{"aq", card.aq},
              {"diagnosis", diagnosis_name(card.diagnosis)},
              {"threshold", kAphasiaThreshold},
              {"subtests", subtests},
              {"model_fingerprint", to_hex(card.model_fingerprint)},
              {"bank_version", card.bank_version},
              {"responses", responses}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

std::vector<DoseJob> dose_plans(const Model& model, std::span<const ConditionRankings> conditions,
                                const DoseResponseConfig& config) {
  if (config.budgets.empty()) throw InputError("dose-response needs at least one budget");
  if (config.budgets.front() == 0 ||
      std::adjacent_find(config.budgets.begin(), config.budgets.end(), std::greater_equal<>()) != config.budgets.end())
    throw InputError("dose-response budgets must be positive and strictly increasing");
  if (config.seeds == 0) throw InputError("dose-response needs at least one seed");
  const std::size_t largest = config.budgets.back();
  const std::vector<UnitId> inventory = model.units();
  if (largest > inventory.size()) throw InputError("budget exceeds the unit inventory");
  for (const auto& c : conditions) {
    if (c.name == "intact" || c.name == "random") throw InputError("reserved condition name '" + c.name + "'");
    if (c.per_seed.size() != 1 && c.per_seed.size() != config.seeds)
      throw InputError("condition '" + c.name + "' needs one ranking or one per seed");
    for (const auto& r : c.per_seed)
      if (r.size() < largest) throw InputError("ranking '" + c.name + "' is shorter than the largest budget");
  }

  std::vector<DoseJob> jobs;
  jobs.push_back({{"intact", "none", 0, 0, 0.0}, {LesionScheme::zeroing, {}, Budget::units(0), 0, "intact"}, 1});
  std::vector<Budget> budgets;
  for (auto b : config.budgets) budgets.push_back(Budget::units(b));

  for (LesionScheme scheme : config.schemes) {
    if (is_random_scheme(scheme)) throw InputError("dose-response schemes are targeted; random controls are implied");
    const std::string sname(scheme_name(scheme));
    const LesionScheme random_scheme = is_xavier_scheme(scheme) ? LesionScheme::random_xavier
                                                                : LesionScheme::random_zeroing;
    for (const auto& c : conditions) {
      const bool deterministic = !is_xavier_scheme(scheme) && c.per_seed.size() == 1;
      const std::size_t runs = deterministic ? 1 : config.seeds;
      for (std::size_t s = 0; s < runs; ++s) {
        const std::uint64_t seed = derive_seed(config.seed, "dose-" + sname + "-" + c.name, std::to_string(s));
        const auto& ranking = c.per_seed[c.per_seed.size() == 1 ? 0 : s];
        for (auto& plan : make_progressive_plans(ranking, budgets, scheme, seed, c.name))
          jobs.push_back({{c.name, sname, plan.targets.size(), seed, 0.0}, std::move(plan), config.seeds / runs});
      }
    }
    for (std::size_t s = 0; s < config.seeds; ++s) {
      const std::uint64_t seed = derive_seed(config.seed, "dose-random", std::to_string(s));
      const std::uint64_t init_seed = derive_seed(config.seed, "dose-" + sname + "-random", std::to_string(s));
      const LesionPlan full = make_random_plan(inventory, Budget::units(largest), seed, random_scheme);
      for (auto b : config.budgets) {
        LesionPlan plan = full;
        plan.targets.resize(b);
        plan.budget = Budget::units(b);
        plan.seed = init_seed;
        jobs.push_back({{"random", sname, b, seed, 0.0}, std::move(plan), 1});
      }
    }
  }

  return jobs;
}

std::vector<DoseRow> evaluate_dose(const Model& model, std::span<const DoseJob> jobs, const ItemBank& bank,
                                   const DoseResponseConfig& config) {
  WabOptions inner = config.wab;
  const std::size_t workers = inner.workers;
  inner.workers = 1;  // parallel over lesioned models, not items
  std::vector<double> aq(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t j) {
    const DoseJob& job = jobs[j];
    aq[j] = job.plan.targets.empty() ? run_wab(model, bank, inner).aq
                                     : run_wab(apply_lesion(model, job.plan, config.lesion), bank, inner).aq;
  });
  std::vector<DoseRow> rows;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    DoseRow row = jobs[j].row;
    row.aq = aq[j];
    for (std::size_t r = 0; r < jobs[j].replicas; ++r) rows.push_back(row);
  }
  return rows;
}

std::vector<DoseRow> dose_response(const Model& model, std::span<const ConditionRankings> conditions,
                                   const ItemBank& bank, const DoseResponseConfig& config) {
  return evaluate_dose(model, dose_plans(model, conditions, config), bank, config);
}

std::string dose_jobs_to_json(std::span<const DoseJob> jobs) {
  json out = json::array();
  for (const auto& job : jobs) {
    out.push_back({{"condition", job.row.condition},
                   {"scheme", job.row.scheme},
                   {"budget", job.row.budget},
                   {"seed", job.row.seed},
                   {"replicas", job.replicas},
                   {"plan", json::parse(lesion_plan_to_json(job.plan))}});
  }
  return out.dump(1) + "\n";
}

std::vector<DoseJob> dose_jobs_from_json(std::string_view text) {
  std::vector<DoseJob> jobs;
  try {
    for (const auto& j : json::parse(text)) {
      DoseJob job;
      job.row.condition = j.at("condition").get<std::string>();
      job.row.scheme = j.at("scheme").get<std::string>();
      job.row.budget = j.at("budget").get<std::size_t>();
      job.row.seed = j.at("seed").get<std::uint64_t>();
      job.replicas = j.at("replicas").get<std::size_t>();
      job.plan = lesion_plan_from_json(j.at("plan").dump());
      if (job.replicas == 0) throw DataError("dose job with zero replicas");
      jobs.push_back(std::move(job));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed dose plans: ") + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("malformed dose plans: ") + e.what());
  }
  return jobs;
}

std::vector<DoseCurve> dose_curves(std::span<const DoseRow> rows) {
  std::optional<double> intact;
  std::map<std::pair<std::string, std::string>, std::map<std::size_t, std::pair<double, std::size_t>>> cells;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : rows) {
    if (r.condition == "intact") {
      intact = r.aq;
      continue;
    }
    const auto key = std::make_pair(r.condition, r.scheme);
    if (!cells.contains(key)) order.push_back(key);
    auto& cell = cells[key][r.budget];
    cell.first += r.aq;
    cell.second += 1;
  }
  if (!intact) throw DataError("dose-response rows lack the intact baseline");
  std::vector<DoseCurve> curves;
  for (const auto& key : order) {
    DoseCurve c{key.first, key.second, {0}, {*intact}};
    for (const auto& [budget, cell] : cells[key]) {
      c.budgets.push_back(budget);
      c.mean_aq.push_back(cell.first / static_cast<double>(cell.second));
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

std::string dose_rows_to_csv(std::span<const DoseRow> rows) {
  std::ostringstream out;
  out << "condition,scheme,budget,seed,aq\n";
  for (const auto& r : rows)
    out << r.condition << ',' << r.scheme << ',' << r.budget << ',' << r.seed << ',' << format_double(r.aq) << '\n';
  return out.str();
}

}  // namespace lesionlab
