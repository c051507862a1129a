#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "esgkg/clients.hpp"
#include "esgkg/consolidation.hpp"
#include "esgkg/extraction.hpp"
#include "esgkg/regression.hpp"
#include "esgkg/search.hpp"

namespace esgkg {

enum class Stage { ingest, search, extract, consolidate, graph, analyze, interpret, all };

std::optional<Stage> parse_stage(const std::string& name);
std::string stage_name(Stage stage);

struct AnalysisConfig {
  int null_sims = 1000;
  double edge_threshold = 0.06;
};

struct RegressionConfig {
  int folds = 8;
  ElasticNetGrid grid;
  double pillar_floor = 0.5;
};

struct RunConfig {
  std::filesystem::path corpus_manifest;
  std::filesystem::path category_file;
  std::filesystem::path example_file;
  std::filesystem::path records_file;
  std::filesystem::path pillar_map_file;
  std::optional<std::filesystem::path> stub_replies;  // scripted offline generator
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  std::size_t min_sentence_tokens = 3;
  std::size_t embed_dim = 1024;
  int parallelism = 8;
  SearchConfig search;
  ConsolidationConfig consolidation;
  GenerationConfig generation;
  AblationFlags ablation;
  AnalysisConfig analysis;
  RegressionConfig regression;
};

// Parses and validates the JSON run configuration. Relative paths resolve
// against the config file's directory; every input path must exist.
// Unknown keys are rejected so typos fail loudly instead of silently
// falling back to defaults.
RunConfig load_run_config(const std::filesystem::path& path);

// Digest over every semantic field except output_dir. Each stage stamps it
// into a sidecar manifest; a stage whose stamp no longer matches is stale
// and re-runs.
std::string config_hash(const RunConfig& cfg);

// True when the stage directory holds a matching manifest and every listed
// artifact file is present.
bool stage_complete(const RunConfig& cfg, Stage stage);

struct StageOutcome {
  Stage stage;
  bool skipped = false;  // already complete under the current config
};

// Executes one stage, or the whole chain for Stage::all. A single stage
// requires every upstream stage to be complete (MissingArtifact otherwise)
// and is itself skipped when already complete, unless force. Artifacts are
// written under output_dir/<stage>/ with a manifest.json sidecar written
// last, so an interrupted stage never counts as complete.
std::vector<StageOutcome> run(Stage stage, const RunConfig& cfg, bool force = false);

}  // namespace esgkg
