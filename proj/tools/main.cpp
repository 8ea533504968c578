// lesionlab: command-line driver for the lesion pipeline.
//
//   lesionlab run-all --config configs/default.ini --run-dir runs/default
//   lesionlab probe --arch moe --run-dir runs/default
//
// Exit codes: 0 ok, 2 config error, 3 missing or stale prerequisite, 1 anything else.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lesionlab/config.hpp"
#include "lesionlab/errors.hpp"
#include "lesionlab/io.hpp"
#include "lesionlab/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDependency = 3;

struct Options {
  std::string config;
  std::string run_dir = "runs/default";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> arch;
  std::optional<std::size_t> workers;
  bool quiet = false;
};

lesionlab::RunConfig resolve_config(const Options& opt) {
  lesionlab::RunConfig config;
  if (!opt.config.empty()) {
    config = lesionlab::load_config(opt.config);
  } else if (const auto copy = std::filesystem::path(opt.run_dir) / "config.copy"; std::filesystem::exists(copy)) {
    // Later stages can be invoked with just the run directory.
    config = lesionlab::load_config(copy);
  }
  if (opt.seed) config.seed = *opt.seed;
  if (opt.arch == "both") {
    config.architectures = {lesionlab::Architecture::dense, lesionlab::Architecture::moe};
  } else if (opt.arch) {
    config.architectures = {lesionlab::architecture_from_name(*opt.arch)};
  }
  config.validate();
  return config;
}

int execute(const Options& opt, std::optional<lesionlab::Stage> stage) {
  auto config = resolve_config(opt);
  lesionlab::PipelineOptions po;
  po.workers = opt.workers;
  if (!opt.quiet) po.log = [](std::string_view line) { std::cerr << "[lesionlab] " << line << '\n'; };
  lesionlab::Pipeline pipeline(std::move(config), opt.run_dir, po);
  const auto outcomes = stage ? pipeline.run(*stage) : pipeline.run_all();
  if (!opt.quiet) {
    std::size_t ran = 0;
    for (const auto& o : outcomes) ran += o.skipped ? 0 : 1;
    std::cout << ran << " stage(s) ran, " << outcomes.size() - ran << " up to date; results in " << opt.run_dir
              << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aphasia-style lesion experiments on toy dense and MoE language models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lesionlab::kToolVersion));

  Options opt;
  std::optional<lesionlab::Stage> selected;
  bool run_all = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "INI config file (defaults to <run-dir>/config.copy, then built-ins)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--run-dir", opt.run_dir, "run directory")->capture_default_str();
    cmd->add_option("--seed", opt.seed, "override the global seed");
    cmd->add_option("--arch", opt.arch, "architectures to process (default: as configured)")
        ->check(CLI::IsMember({"dense", "moe", "both"}));
    cmd->add_option("--workers", opt.workers, "worker threads (outputs do not depend on it)")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("-q,--quiet", opt.quiet, "no progress output");
  };

  for (lesionlab::Stage s : lesionlab::all_stages()) {
    auto* cmd = app.add_subcommand(std::string(lesionlab::stage_name(s)), "run the " +
                                                                              std::string(lesionlab::stage_name(s)) +
                                                                              " stage");
    add_common(cmd);
    cmd->callback([&selected, s] { selected = s; });
  }
  auto* all = app.add_subcommand("run-all", "run every stage, skipping those already complete");
  add_common(all);
  all->callback([&run_all] { run_all = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    return execute(opt, run_all ? std::nullopt : selected);
  } catch (const lesionlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const lesionlab::DependencyError& e) {
    std::cerr << "missing prerequisite '" << e.prerequisite() << "': " << e.what() << '\n';
    return kExitDependency;
  } catch (const lesionlab::StalenessError& e) {
    std::cerr << "stale prerequisite: " << e.what() << '\n';
    return kExitDependency;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
