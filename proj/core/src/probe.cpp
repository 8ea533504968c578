#include "lesionlab/probe.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lesionlab/errors.hpp"
#include "lesionlab/fingerprint.hpp"
#include "lesionlab/inference.hpp"
#include "lesionlab/io.hpp"
#include "lesionlab/parallel.hpp"

namespace lesionlab {

using nlohmann::json;

std::vector<Task> encode_tasks(const PairSuites& suites, const Vocabulary& vocab) {
  std::vector<Task> tasks;
  for (const auto& [phenomenon, pairs] : suites) {
    Task task{std::string(phenomenon_name(phenomenon)), {}};
    for (const auto& p : pairs) task.pairs.emplace_back(vocab.encode_sequence(p.good), vocab.encode_sequence(p.bad));
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::uint64_t task_set_fingerprint(std::span<const Task> tasks) {
  // Sorted by name so the fingerprint does not depend on suite order.
  std::vector<const Task*> sorted;
  for (const auto& t : tasks) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->name < b->name; });
  Fingerprint fp;
  for (const Task* t : sorted) {
    fp.text(t->name).u64(t->pairs.size());
    for (const auto& [good, bad] : t->pairs) {
      fp.u64(good.size());
      for (int id : good) fp.u64(static_cast<std::uint64_t>(id));
      fp.u64(bad.size());
      for (int id : bad) fp.u64(static_cast<std::uint64_t>(id));
    }
  }
  return fp.value();
}

namespace {

double fraction(std::size_t correct, std::size_t total) {
  return static_cast<double>(correct) / static_cast<double>(total);
}

void require_pairs(const Task& task) {
  if (task.pairs.empty()) throw InputError("task '" + task.name + "' has no pairs");
}

}  // namespace

double task_accuracy(const SequenceScorer& score, const Task& task) {
  require_pairs(task);
  std::size_t correct = 0;
  for (const auto& [good, bad] : task.pairs)
    if (score(good) > score(bad)) ++correct;
  return fraction(correct, task.pairs.size());
}

double task_accuracy(const Model& model, const Task& task, const UnitOverrideSet& overrides) {
  return task_accuracy([&](std::span<const int> s) { return avg_log_prob(model, s, overrides); }, task);
}

std::size_t AttributionMap::task_index(std::string_view task) const {
  auto it = std::find(tasks.begin(), tasks.end(), task);
  if (it == tasks.end()) throw LookupError("unknown task '" + std::string(task) + "'");
  return static_cast<std::size_t>(it - tasks.begin());
}

std::size_t AttributionMap::unit_index(UnitId unit) const {
  auto it = std::find(units.begin(), units.end(), unit);
  if (it == units.end()) throw DataError("attribution map does not cover unit " + unit_label(unit));
  return static_cast<std::size_t>(it - units.begin());
}

AttributionMap zero_ablation_sweep(const Model& model, std::span<const Task> tasks, const SweepOptions& options) {
  if (tasks.empty()) throw InputError("no tasks to sweep");
  AttributionMap map;
  map.units = model.units();
  if (map.units.empty()) throw ConfigError("model has no units to ablate");
  map.model_fingerprint = model.fingerprint();
  map.task_fingerprint = task_set_fingerprint(tasks);

  // Baseline traces, one per sentence; ablated scores resume from them.
  struct Traced {
    ForwardTrace good, bad;
  };
  std::vector<std::vector<Traced>> traces(tasks.size());
  std::vector<std::size_t> baseline_correct(tasks.size(), 0);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    require_pairs(tasks[t]);
    map.tasks.push_back(tasks[t].name);
    traces[t].resize(tasks[t].pairs.size());
  }
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t t = 0; t < tasks.size(); ++t)
    for (std::size_t p = 0; p < tasks[t].pairs.size(); ++p) jobs.emplace_back(t, p);
  parallel_for(jobs.size(), options.workers, [&](std::size_t j) {
    const auto [t, p] = jobs[j];
    traces[t][p] = {trace_sequence(model, tasks[t].pairs[p].first), trace_sequence(model, tasks[t].pairs[p].second)};
  });
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (const auto& tr : traces[t])
      if (tr.good.avg_log_prob() > tr.bad.avg_log_prob()) ++baseline_correct[t];
    map.baseline.push_back(fraction(baseline_correct[t], tasks[t].pairs.size()));
  }

  const std::size_t U = map.units.size();
  map.delta.assign(tasks.size(), std::vector<double>(U, 0.0));
  parallel_for(U, options.workers, [&](std::size_t u) {
    const UnitOverrideSet ablate{map.units[u]};
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      std::size_t correct = 0;
      for (std::size_t p = 0; p < tasks[t].pairs.size(); ++p) {
        const auto& [good, bad] = tasks[t].pairs[p];
        const double g = avg_log_prob_resumed(model, good, traces[t][p].good, ablate);
        const double b = avg_log_prob_resumed(model, bad, traces[t][p].bad, ablate);
        if (g > b) ++correct;
      }
      map.delta[t][u] = fraction(correct, tasks[t].pairs.size()) - map.baseline[t];
    }
  });
  map.ablated_evaluations = U * tasks.size();
  return map;
}

std::vector<UnitId> phenomenon_ranking(const AttributionMap& map, std::string_view task) {
  const auto& d = map.delta.at(map.task_index(task));
  std::vector<std::size_t> idx(map.units.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (d[a] != d[b]) return d[a] < d[b];
    return std::tie(map.units[a].layer, map.units[a].index) < std::tie(map.units[b].layer, map.units[b].index);
  });
  std::vector<UnitId> out;
  for (auto i : idx) out.push_back(map.units[i]);
  return out;
}

std::string attribution_to_csv(const AttributionMap& map) {
  std::ostringstream out;
  out << "unit";
  for (const auto& t : map.tasks) out << ',' << t;
  out << '\n';
  for (std::size_t u = 0; u < map.units.size(); ++u) {
    out << unit_label(map.units[u]);
    for (std::size_t t = 0; t < map.tasks.size(); ++t) out << ',' << format_double(map.delta[t][u]);
    out << '\n';
  }
  return out.str();
}

std::string attribution_metadata_json(const AttributionMap& map) {
  json baseline = json::object();
  for (std::size_t t = 0; t < map.tasks.size(); ++t) baseline[map.tasks[t]] = map.baseline[t];
  json doc = {{"tasks", map.tasks},
              {"baseline_accuracy", baseline},
              {"unit_count", map.units.size()},
              {"model_fingerprint", to_hex(map.model_fingerprint)},
              {"task_fingerprint", to_hex(map.task_fingerprint)},
              {"ablated_evaluations", map.ablated_evaluations},
              {"tie_rule", "ties count as incorrect"}};
  return doc.dump(2) + "\n";
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw DataError("malformed number '" + s + "'");
  return v;
}

std::uint64_t parse_hex(const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc{} || p != s.data() + s.size()) throw DataError("malformed fingerprint '" + s + "'");
  return v;
}

}  // namespace

AttributionMap attribution_from_files(std::string_view csv, std::string_view metadata_json) {
  AttributionMap map;
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty attribution CSV");
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "unit") throw DataError("attribution CSV must start with a unit column");
  map.tasks.assign(header.begin() + 1, header.end());
  map.delta.assign(map.tasks.size(), {});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw DataError("ragged attribution CSV row: " + line);
    try {
      map.units.push_back(parse_unit_label(cells[0]));
    } catch (const LookupError& e) {
      throw DataError(e.what());
    }
    for (std::size_t t = 0; t < map.tasks.size(); ++t) map.delta[t].push_back(parse_double(cells[t + 1]));
  }
  try {
    const json meta = json::parse(metadata_json);
    for (const auto& t : map.tasks) map.baseline.push_back(meta.at("baseline_accuracy").at(t).get<double>());
    map.model_fingerprint = parse_hex(meta.at("model_fingerprint").get<std::string>());
    map.task_fingerprint = parse_hex(meta.at("task_fingerprint").get<std::string>());
    map.ablated_evaluations = meta.at("ablated_evaluations").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed attribution metadata: ") + e.what());
  }
  return map;
}

}  // namespace lesionlab
