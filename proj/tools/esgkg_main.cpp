#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "esgkg/errors.hpp"
#include "esgkg/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ESG knowledge-graph pipeline"};
  std::string stage_arg;
  std::string config_path;
  bool force = false;
  std::uint64_t seed = 0;

  app.add_option("stage", stage_arg,
                 "ingest, search, extract, consolidate, graph, analyze, interpret or all")
      ->required();
  app.add_option("--config", config_path, "run configuration JSON")->required();
  app.add_flag("--force", force, "re-run stages even when their artifacts are up to date");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "override the configured seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto stage = esgkg::parse_stage(stage_arg);
  if (!stage) {
    std::fprintf(stderr, "unknown stage \"%s\"\n", stage_arg.c_str());
    return 2;
  }

  esgkg::RunConfig cfg;
  try {
    cfg = esgkg::load_run_config(config_path);
    if (seed_opt->count() > 0) cfg.seed = seed;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }

  try {
    for (const auto& outcome : esgkg::run(*stage, cfg, force)) {
      std::printf("%-11s %s\n", esgkg::stage_name(outcome.stage).c_str(),
                  outcome.skipped ? "up to date" : "done");
    }
    return 0;
  } catch (const esgkg::MissingArtifact& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const esgkg::ConfigInvalid& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }
}
