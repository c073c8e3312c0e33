#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "shortlens/errors.hpp"
#include "shortlens/pipeline.hpp"

using namespace shortlens;

namespace {

struct GlobalFlags {
  std::string config;
  std::string store;
  std::string backend;
  std::size_t workers = 0;
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
  bool force = false;
  std::string log_level = "info";
};

PipelineConfig build_config(const GlobalFlags& g, const std::vector<std::string>& manifests) {
  PipelineConfig c = g.config.empty() ? PipelineConfig::from_json(json::object(), fs::current_path())
                                      : PipelineConfig::load(g.config);
  if (!g.store.empty()) c.store_root = g.store;
  if (!g.backend.empty()) c.backend_url = g.backend;
  if (g.workers > 0) c.workers = {g.workers, g.workers, g.workers};
  if (g.seed) c.seed = *g.seed;
  for (const auto& m : manifests) {
    auto sep = m.find('=');
    if (sep == std::string::npos || sep == 0 || sep + 1 == m.size())
      throw UsageError("--manifest expects OUTLET=PATH, got '" + m + "'");
    c.manifests.push_back({m.substr(0, sep), m.substr(sep + 1)});
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("shortlens");
  spdlog::set_default_logger(logger);

  CLI::App app{"Multimodal analysis pipeline for short-form news videos"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config, "Pipeline configuration (JSON)");
  app.add_option("--store", g.store, "Store directory (overrides the config)");
  app.add_option("--backend", g.backend, "Model backend base URL, or stub[:script.json]");
  app.add_option("--workers", g.workers, "Worker count for every pool")->check(CLI::Range(1, 64));
  app.add_option("--seed", g.seed, "Seed for sampling and splits");
  app.add_flag("--dry-run", g.dry_run, "Report what would run without calling backends or writing outputs");
  app.add_flag("--force", g.force, "Redo videos even when their inputs are unchanged");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::vector<std::string> manifests;
  std::string out_dir;
  std::vector<std::string> tables;
  std::map<CLI::App*, std::optional<Stage>> commands;

  for (Stage s : kAllStages) {
    auto* sub = app.add_subcommand(std::string(to_string(s)), "Run the " + std::string(to_string(s)) + " stage");
    commands[sub] = s;
    if (s == Stage::kIngest)
      sub->add_option("--manifest", manifests, "Additional manifest as OUTLET=PATH (repeatable)");
    if (s == Stage::kReport) {
      sub->add_option("--out", out_dir, "Output directory (default <store>/report)");
      sub->add_option("--tables", tables, "Subset of tables to write")->delimiter(',');
    }
  }
  auto* all = app.add_subcommand("all", "Run every stage in dependency order");
  commands[all] = std::nullopt;
  all->add_option("--out", out_dir, "Report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    Pipeline pipeline(build_config(g, manifests));
    StageOptions opt;
    opt.force = g.force;
    opt.dry_run = g.dry_run;
    if (!out_dir.empty()) opt.out_dir = fs::path(out_dir);
    opt.tables.insert(tables.begin(), tables.end());

    for (const auto& [sub, stage] : commands) {
      if (!sub->parsed()) continue;
      if (stage) {
        std::cout << pipeline.run(*stage, opt).to_json().dump(2) << "\n";
      } else {
        json reports = json::array();
        for (Stage s : topological_stages()) reports.push_back(pipeline.run(s, opt).to_json());
        std::cout << reports.dump(2) << "\n";
      }
    }
    return 0;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return static_cast<int>(ExitCode::kDataIntegrity);
  }
}
