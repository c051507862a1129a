#include "esgkg/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

#include "esgkg/analytics.hpp"
#include "esgkg/corpus.hpp"
#include "esgkg/errors.hpp"
#include "esgkg/graph.hpp"
#include "esgkg/io.hpp"

#include <nlohmann/json.hpp>

namespace esgkg {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<Stage, 7> kChain = {
    Stage::ingest, Stage::search, Stage::extract, Stage::consolidate,
    Stage::graph,  Stage::analyze, Stage::interpret};

}  // namespace

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::search: return "search";
    case Stage::extract: return "extract";
    case Stage::consolidate: return "consolidate";
    case Stage::graph: return "graph";
    case Stage::analyze: return "analyze";
    case Stage::interpret: return "interpret";
    case Stage::all: return "all";
  }
  return "?";
}

std::optional<Stage> parse_stage(const std::string& name) {
  for (Stage s : kChain) {
    if (name == stage_name(s)) return s;
  }
  if (name == "all") return Stage::all;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) throw ConfigInvalid("unknown key \"" + key + "\" in " + where);
  }
}

double number_or(const json& obj, const char* key, double fallback,
                 const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw ConfigInvalid(std::string(key) + " in " + where + " must be a number");
  return obj[key].get<double>();
}

long long integer_or(const json& obj, const char* key, long long fallback,
                     const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer() && !obj[key].is_number_unsigned())
    throw ConfigInvalid(std::string(key) + " in " + where + " must be an integer");
  return obj[key].get<long long>();
}

bool boolean_or(const json& obj, const char* key, bool fallback,
                const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean())
    throw ConfigInvalid(std::string(key) + " in " + where + " must be a boolean");
  return obj[key].get<bool>();
}

}  // namespace

RunConfig load_run_config(const fs::path& path) {
  json parsed = json::parse(read_file(path), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object())
    throw ConfigInvalid("run config must be a JSON object: " + path.string());
  const fs::path base = fs::absolute(path).parent_path();

  check_keys(parsed,
             {"corpus_manifest", "category_file", "example_file", "records_file",
              "pillar_map_file", "stub_replies", "output_dir", "seed",
              "min_sentence_tokens", "embed_dim", "parallelism", "search",
              "consolidation", "generation", "ablation", "analysis", "regression"},
             "run config");

  auto path_field = [&](const char* key, bool required) -> fs::path {
    if (!parsed.contains(key)) {
      if (required) throw ConfigInvalid(std::string(key) + " is required");
      return {};
    }
    if (!parsed[key].is_string())
      throw ConfigInvalid(std::string(key) + " must be a string path");
    fs::path p = parsed[key].get<std::string>();
    return p.is_absolute() ? p : base / p;
  };

  RunConfig cfg;
  cfg.corpus_manifest = path_field("corpus_manifest", true);
  cfg.category_file = path_field("category_file", true);
  cfg.example_file = path_field("example_file", true);
  cfg.records_file = path_field("records_file", true);
  cfg.pillar_map_file = path_field("pillar_map_file", true);
  cfg.output_dir = path_field("output_dir", true);
  if (parsed.contains("stub_replies")) cfg.stub_replies = path_field("stub_replies", false);

  for (const fs::path* p : {&cfg.corpus_manifest, &cfg.category_file, &cfg.example_file,
                            &cfg.records_file, &cfg.pillar_map_file}) {
    if (!fs::exists(*p))
      throw ConfigInvalid("configured path does not exist: " + p->string());
  }
  if (cfg.stub_replies && !fs::exists(*cfg.stub_replies))
    throw ConfigInvalid("configured path does not exist: " + cfg.stub_replies->string());

  if (!parsed.contains("seed"))
    throw ConfigInvalid("seed is required so runs are reproducible");
  if (!parsed["seed"].is_number_integer() && !parsed["seed"].is_number_unsigned())
    throw ConfigInvalid("seed must be an integer");
  cfg.seed = parsed["seed"].get<std::uint64_t>();

  const long long min_tokens =
      integer_or(parsed, "min_sentence_tokens", 3, "run config");
  if (min_tokens < 1) throw ConfigInvalid("min_sentence_tokens must be positive");
  cfg.min_sentence_tokens = static_cast<std::size_t>(min_tokens);

  const long long dim = integer_or(parsed, "embed_dim", 1024, "run config");
  if (dim < 2) throw ConfigInvalid("embed_dim must be at least 2");
  cfg.embed_dim = static_cast<std::size_t>(dim);

  const long long par = integer_or(parsed, "parallelism", 8, "run config");
  if (par < 1) throw ConfigInvalid("parallelism must be positive");
  cfg.parallelism = static_cast<int>(par);

  if (parsed.contains("search")) {
    const json& s = parsed["search"];
    if (!s.is_object()) throw ConfigInvalid("search must be an object");
    check_keys(s, {"t_sim", "k"}, "search");
    cfg.search.t_sim = number_or(s, "t_sim", cfg.search.t_sim, "search");
    const long long k = integer_or(s, "k", cfg.search.k, "search");
    if (k < 1) throw ConfigInvalid("search.k must be positive");
    cfg.search.k = static_cast<int>(k);
  }

  if (parsed.contains("consolidation")) {
    const json& c = parsed["consolidation"];
    if (!c.is_object()) throw ConfigInvalid("consolidation must be an object");
    check_keys(c, {"threshold"}, "consolidation");
    cfg.consolidation.threshold =
        number_or(c, "threshold", cfg.consolidation.threshold, "consolidation");
    if (cfg.consolidation.threshold < -1.0 || cfg.consolidation.threshold > 1.0)
      throw ConfigInvalid("consolidation.threshold must lie in [-1, 1]");
  }

  if (parsed.contains("generation")) {
    const json& g = parsed["generation"];
    if (!g.is_object()) throw ConfigInvalid("generation must be an object");
    check_keys(g, {"temperature", "num_beams", "max_tokens"}, "generation");
    cfg.generation.temperature =
        number_or(g, "temperature", cfg.generation.temperature, "generation");
    if (cfg.generation.temperature < 0.0)
      throw ConfigInvalid("generation.temperature must be non-negative");
    const long long beams = integer_or(g, "num_beams", cfg.generation.num_beams, "generation");
    const long long toks = integer_or(g, "max_tokens", cfg.generation.max_tokens, "generation");
    if (beams < 1 || toks < 1)
      throw ConfigInvalid("generation.num_beams and max_tokens must be positive");
    cfg.generation.num_beams = static_cast<int>(beams);
    cfg.generation.max_tokens = static_cast<int>(toks);
  }

  if (parsed.contains("ablation")) {
    const json& a = parsed["ablation"];
    if (!a.is_object()) throw ConfigInvalid("ablation must be an object");
    check_keys(a, {"omit_schema", "omit_examples"}, "ablation");
    cfg.ablation.include_schema = !boolean_or(a, "omit_schema", false, "ablation");
    cfg.ablation.include_examples = !boolean_or(a, "omit_examples", false, "ablation");
  }

  if (parsed.contains("analysis")) {
    const json& a = parsed["analysis"];
    if (!a.is_object()) throw ConfigInvalid("analysis must be an object");
    check_keys(a, {"null_sims", "edge_threshold"}, "analysis");
    const long long sims = integer_or(a, "null_sims", cfg.analysis.null_sims, "analysis");
    if (sims < 1) throw ConfigInvalid("analysis.null_sims must be positive");
    cfg.analysis.null_sims = static_cast<int>(sims);
    cfg.analysis.edge_threshold =
        number_or(a, "edge_threshold", cfg.analysis.edge_threshold, "analysis");
  }

  if (parsed.contains("regression")) {
    const json& r = parsed["regression"];
    if (!r.is_object()) throw ConfigInvalid("regression must be an object");
    check_keys(r, {"folds", "alphas", "l1_ratios", "pillar_floor"}, "regression");
    const long long folds = integer_or(r, "folds", cfg.regression.folds, "regression");
    if (folds < 2) throw ConfigInvalid("regression.folds must be at least 2");
    cfg.regression.folds = static_cast<int>(folds);
    cfg.regression.pillar_floor =
        number_or(r, "pillar_floor", cfg.regression.pillar_floor, "regression");
    auto number_list = [&](const char* key, std::vector<double>& target) {
      if (!r.contains(key)) return;
      if (!r[key].is_array() || r[key].empty())
        throw ConfigInvalid(std::string("regression.") + key + " must be a non-empty array");
      target.clear();
      for (const auto& v : r[key]) {
        if (!v.is_number())
          throw ConfigInvalid(std::string("regression.") + key + " must hold numbers");
        target.push_back(v.get<double>());
      }
    };
    number_list("alphas", cfg.regression.grid.alphas);
    number_list("l1_ratios", cfg.regression.grid.l1_ratios);
    for (double a : cfg.regression.grid.alphas)
      if (a < 0.0) throw ConfigInvalid("regression.alphas must be non-negative");
    for (double l : cfg.regression.grid.l1_ratios)
      if (l < 0.0 || l > 1.0) throw ConfigInvalid("regression.l1_ratios must lie in [0, 1]");
  }

  return cfg;
}

std::string config_hash(const RunConfig& cfg) {
  // output_dir is deliberately absent: the same inputs and parameters are
  // the same run wherever the artifacts land. parallelism is absent because
  // it cannot change any output byte.
  ordered_json j;
  j["corpus_manifest"] = fs::absolute(cfg.corpus_manifest).lexically_normal().string();
  j["category_file"] = fs::absolute(cfg.category_file).lexically_normal().string();
  j["example_file"] = fs::absolute(cfg.example_file).lexically_normal().string();
  j["records_file"] = fs::absolute(cfg.records_file).lexically_normal().string();
  j["pillar_map_file"] = fs::absolute(cfg.pillar_map_file).lexically_normal().string();
  j["stub_replies"] = cfg.stub_replies
                          ? fs::absolute(*cfg.stub_replies).lexically_normal().string()
                          : std::string();
  j["seed"] = cfg.seed;
  j["min_sentence_tokens"] = cfg.min_sentence_tokens;
  j["embed_dim"] = cfg.embed_dim;
  j["search"] = ordered_json{{"t_sim", cfg.search.t_sim}, {"k", cfg.search.k}};
  j["consolidation"] = ordered_json{{"threshold", cfg.consolidation.threshold}};
  j["generation"] = ordered_json{{"temperature", cfg.generation.temperature},
                                 {"num_beams", cfg.generation.num_beams},
                                 {"max_tokens", cfg.generation.max_tokens}};
  j["ablation"] = ordered_json{{"include_schema", cfg.ablation.include_schema},
                               {"include_examples", cfg.ablation.include_examples}};
  j["analysis"] = ordered_json{{"null_sims", cfg.analysis.null_sims},
                               {"edge_threshold", cfg.analysis.edge_threshold}};
  j["regression"] = ordered_json{{"folds", cfg.regression.folds},
                                 {"alphas", cfg.regression.grid.alphas},
                                 {"l1_ratios", cfg.regression.grid.l1_ratios},
                                 {"pillar_floor", cfg.regression.pillar_floor}};
  return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Artifact plumbing

namespace {

fs::path dir_of(const RunConfig& cfg, Stage stage) {
  return cfg.output_dir / stage_name(stage);
}

void write_stage_manifest(const RunConfig& cfg, Stage stage,
                          std::vector<std::string> artifacts) {
  std::sort(artifacts.begin(), artifacts.end());
  ordered_json j;
  j["stage"] = stage_name(stage);
  j["config_hash"] = config_hash(cfg);
  j["artifacts"] = artifacts;
  write_file(dir_of(cfg, stage) / "manifest.json", j.dump(2) + "\n");
}

std::string read_artifact(const RunConfig& cfg, Stage stage, const std::string& name) {
  const fs::path p = dir_of(cfg, stage) / name;
  try {
    return read_file(p);
  } catch (const UnreadableFile&) {
    throw MissingArtifact(p.string() + "; run the '" + stage_name(stage) + "' stage first");
  }
}

std::vector<json> parse_jsonl(const std::string& content, const std::string& what) {
  std::vector<json> out;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    const std::string_view line(content.data() + start, end - start);
    if (!trim(line).empty()) {
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded())
        throw MissingArtifact(what + " is corrupt (unparseable line)");
      out.push_back(std::move(j));
    }
    start = end + 1;
  }
  return out;
}

ordered_json sentence_to_json(const Sentence& s) {
  ordered_json j;
  j["company_id"] = s.company_id;
  j["doc_index"] = s.doc_index;
  j["text"] = s.text;
  j["start_char"] = s.start_char;
  j["end_char"] = s.end_char;
  return j;
}

Sentence sentence_from_json(const json& j) {
  Sentence s;
  s.company_id = j.at("company_id").get<std::string>();
  s.doc_index = j.at("doc_index").get<int>();
  s.text = j.at("text").get<std::string>();
  s.start_char = j.at("start_char").get<std::size_t>();
  s.end_char = j.at("end_char").get<std::size_t>();
  return s;
}

ordered_json triple_to_json(const EsgTriple& t) {
  ordered_json j;
  j["cat"] = t.cat;
  j["pred"] = t.pred;
  j["obj"] = t.obj;
  j["company_id"] = t.company_id;
  j["doc_index"] = t.doc_index;
  return j;
}

std::vector<EsgTriple> triples_from_jsonl(const std::string& content, const std::string& what) {
  std::vector<EsgTriple> out;
  for (const json& j : parse_jsonl(content, what)) {
    EsgTriple t;
    t.cat = j.at("cat").get<std::string>();
    t.pred = j.at("pred").get<std::string>();
    t.obj = j.at("obj").get<std::string>();
    t.company_id = j.at("company_id").get<std::string>();
    t.doc_index = j.at("doc_index").get<int>();
    out.push_back(std::move(t));
  }
  return out;
}

EmbeddingClient make_embed_client(const RunConfig& cfg) {
  return EmbeddingClient(embedding_backend_from_env(cfg.embed_dim),
                         cfg.output_dir / "cache", cfg.parallelism);
}

GenerationClient make_gen_client(const RunConfig& cfg) {
  return GenerationClient(generation_backend_from_env(cfg.stub_replies),
                          cfg.output_dir / "cache", cfg.parallelism);
}

std::string join_lines(const std::vector<std::string>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row;
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages

void run_ingest(const RunConfig& cfg) {
  const auto docs = load_manifest(cfg.corpus_manifest);
  if (docs.empty())
    throw EmptyCorpus("manifest lists no documents: " + cfg.corpus_manifest.string());

  NaivePdfTextExtractor pdf;
  std::map<std::string, int> next_index;  // per company, across its documents
  std::string jsonl;
  std::vector<std::string> doc_rows = {
      csv_join({"company_id", "fiscal_year", "media", "source", "sentences"})};

  for (const auto& doc : docs) {
    const CleanText clean = extract_text(doc, &pdf);
    auto sentences =
        drop_short_sentences(segment_sentences(clean), cfg.min_sentence_tokens);
    int& counter = next_index[doc.company_id];
    for (auto& s : sentences) {
      s.doc_index = counter++;
      jsonl += sentence_to_json(s).dump();
      jsonl += '\n';
    }
    doc_rows.push_back(csv_join({doc.company_id, std::to_string(doc.fiscal_year),
                                 media_name(doc.media),
                                 doc.source_path.filename().string(),
                                 std::to_string(sentences.size())}));
  }

  write_file(dir_of(cfg, Stage::ingest) / "sentences.jsonl", jsonl);
  write_file(dir_of(cfg, Stage::ingest) / "documents.csv", join_lines(doc_rows));
  write_stage_manifest(cfg, Stage::ingest, {"sentences.jsonl", "documents.csv"});
}

void run_search(const RunConfig& cfg) {
  std::vector<Sentence> sentences;
  for (const json& j :
       parse_jsonl(read_artifact(cfg, Stage::ingest, "sentences.jsonl"), "sentences.jsonl"))
    sentences.push_back(sentence_from_json(j));

  const auto categories = load_categories(cfg.category_file);
  EmbeddingClient client = make_embed_client(cfg);
  const CorpusIndex index = CorpusIndex::build(std::move(sentences), client);
  const auto queries = embed_queries(categories, client);
  const auto selected = select_esg_sentences(index, queries, cfg.search);

  std::string jsonl;
  for (const auto& sel : selected) {
    ordered_json j = sentence_to_json(sel.sentence);
    j["categories"] = sel.matched_categories;
    j["score"] = sel.max_score;
    jsonl += j.dump();
    jsonl += '\n';
  }
  write_file(dir_of(cfg, Stage::search) / "selected.jsonl", jsonl);
  write_stage_manifest(cfg, Stage::search, {"selected.jsonl"});
}

void run_extract(const RunConfig& cfg) {
  std::vector<Sentence> sentences;
  for (const json& j :
       parse_jsonl(read_artifact(cfg, Stage::search, "selected.jsonl"), "selected.jsonl"))
    sentences.push_back(sentence_from_json(j));

  const auto schema = SemanticSchema::with_categories(load_categories(cfg.category_file));
  const auto examples = load_examples(cfg.example_file);
  GenerationClient client = make_gen_client(cfg);
  const ExtractionResult result =
      extract_triples(sentences, client, schema, examples, cfg.generation, cfg.ablation);

  std::string jsonl;
  for (const auto& t : result.triples) {
    jsonl += triple_to_json(t).dump();
    jsonl += '\n';
  }
  ordered_json stats;
  stats["sentences"] = sentences.size();
  stats["triples"] = result.triples.size();
  stats["coverage"] = result.coverage;
  stats["malformed_responses"] = result.malformed_responses;
  stats["skipped_triples"] = result.skipped_triples;

  write_file(dir_of(cfg, Stage::extract) / "triples.jsonl", jsonl);
  write_file(dir_of(cfg, Stage::extract) / "stats.json", stats.dump(2) + "\n");
  write_stage_manifest(cfg, Stage::extract, {"triples.jsonl", "stats.json"});
}

void run_consolidate(const RunConfig& cfg) {
  auto triples = triples_from_jsonl(
      read_artifact(cfg, Stage::extract, "triples.jsonl"), "triples.jsonl");

  std::vector<std::string> cats, preds;
  for (const auto& t : triples) {
    cats.push_back(t.cat);
    preds.push_back(t.pred);
  }
  EmbeddingClient client = make_embed_client(cfg);
  const auto cat_clusters = cluster_labels(cats, client, cfg.consolidation);
  const auto pred_clusters = cluster_labels(preds, client, cfg.consolidation);
  const auto relabeled = relabel_triples(std::move(triples), centroid_map(cat_clusters),
                                         centroid_map(pred_clusters));

  std::string jsonl;
  for (const auto& t : relabeled) {
    jsonl += triple_to_json(t).dump();
    jsonl += '\n';
  }
  write_file(dir_of(cfg, Stage::consolidate) / "triples.jsonl", jsonl);
  write_file(dir_of(cfg, Stage::consolidate) / "category_clusters.json",
             cluster_map_to_json(LabelKind::category, cat_clusters));
  write_file(dir_of(cfg, Stage::consolidate) / "predicate_clusters.json",
             cluster_map_to_json(LabelKind::predicate, pred_clusters));
  write_stage_manifest(cfg, Stage::consolidate,
                       {"triples.jsonl", "category_clusters.json", "predicate_clusters.json"});
}

void run_graph(const RunConfig& cfg) {
  const auto triples = triples_from_jsonl(
      read_artifact(cfg, Stage::consolidate, "triples.jsonl"), "triples.jsonl");
  const KnowledgeGraph kg = build_kg(triples);

  write_file(dir_of(cfg, Stage::graph) / "kg.json", kg_to_json(kg));
  std::vector<std::string> density_rows = {
      csv_join({"projection", "left_nodes", "right_nodes", "edges", "density"})};
  std::vector<std::string> artifacts = {"kg.json", "density.csv"};
  for (Projection p : {Projection::cocat, Projection::catpred, Projection::coact}) {
    const BipartiteGraph g = project(kg, p);
    const std::string name = projection_name(p);
    write_file(dir_of(cfg, Stage::graph) / (name + ".csv"), bipartite_to_csv(g));
    artifacts.push_back(name + ".csv");
    density_rows.push_back(csv_join({name, std::to_string(g.left.size()),
                                     std::to_string(g.right.size()),
                                     std::to_string(g.edge_count()),
                                     format_double(density(g))}));
  }
  write_file(dir_of(cfg, Stage::graph) / "density.csv", join_lines(density_rows));
  write_stage_manifest(cfg, Stage::graph, std::move(artifacts));
}

// One similarity matrix per company attribute, for rank comparison against
// the disclosure-based similarity.
struct FeatureSpec {
  std::string name;
  std::string kind;  // "numeric" or "textual"
  std::string slug;
};

const std::vector<FeatureSpec>& feature_specs() {
  static const std::vector<FeatureSpec> specs = {
      {"Incorporation Year", "numeric", "incorporation_year"},
      {"Employees", "numeric", "employees"},
      {"Market Cap", "numeric", "market_cap"},
      {"EBITDA", "numeric", "ebitda"},
      {"Liabilities", "numeric", "liabilities"},
      {"Sector", "textual", "sector"},
      {"Industry", "textual", "industry"},
      {"Country", "textual", "country"},
      {"Region", "textual", "region"},
      {"Subregion", "textual", "subregion"},
      {"Continent", "textual", "continent"},
  };
  return specs;
}

std::optional<double> numeric_feature(const CompanyRecord& r, const std::string& name) {
  if (name == "Incorporation Year") {
    if (!r.incorporation_year) return std::nullopt;
    return static_cast<double>(*r.incorporation_year);
  }
  if (name == "Employees") return r.employees;
  if (name == "Market Cap") return r.market_cap;
  if (name == "EBITDA") return r.ebitda;
  return r.liabilities;
}

std::optional<std::string> textual_feature(const CompanyRecord& r, const std::string& name) {
  std::string v;
  if (name == "Sector") v = r.sector;
  else if (name == "Industry") v = r.industry;
  else if (name == "Country") v = r.country;
  else if (name == "Region") v = r.region;
  else if (name == "Subregion") v = r.subregion;
  else v = r.continent;
  if (trim(v).empty()) return std::nullopt;
  return v;
}

void run_analyze(const RunConfig& cfg) {
  const KnowledgeGraph kg =
      kg_from_json(read_artifact(cfg, Stage::graph, "kg.json"));

  std::vector<std::string> artifacts;
  for (Projection p : {Projection::cocat, Projection::catpred, Projection::coact}) {
    const std::string name = "centrality_" + projection_name(p) + ".csv";
    write_file(dir_of(cfg, Stage::analyze) / name,
               centralities_to_csv(centralities(project(kg, p))));
    artifacts.push_back(name);
  }

  write_file(dir_of(cfg, Stage::analyze) / "category_entropy.csv",
             entropy_to_csv(category_entropy(kg)));
  write_file(dir_of(cfg, Stage::analyze) / "company_category_entropy.csv",
             entropy_to_csv(company_entropy(kg, CompanyEntropyKind::category)));
  write_file(dir_of(cfg, Stage::analyze) / "company_action_entropy.csv",
             entropy_to_csv(company_entropy(kg, CompanyEntropyKind::action)));
  artifacts.insert(artifacts.end(),
                   {"category_entropy.csv", "company_category_entropy.csv",
                    "company_action_entropy.csv"});

  // Chance-adjusted disclosure similarity over the global action pool.
  const ActionSets sets = action_sets(kg);
  const BipartiteGraph coact = project(kg, Projection::coact);
  const SimilarityResult sim =
      null_adjusted_similarity(sets, coact.right, cfg.analysis.null_sims, cfg.seed);
  write_file(dir_of(cfg, Stage::analyze) / "similarity_observed.csv",
             matrix_to_csv(sim.observed));
  write_file(dir_of(cfg, Stage::analyze) / "similarity_null.csv",
             matrix_to_csv(sim.null_mean));
  write_file(dir_of(cfg, Stage::analyze) / "similarity_adjusted.csv",
             matrix_to_csv(sim.adjusted));
  write_file(dir_of(cfg, Stage::analyze) / "similarity_edges.csv",
             similarity_edges_to_csv(sim.adjusted, cfg.analysis.edge_threshold));
  artifacts.insert(artifacts.end(),
                   {"similarity_observed.csv", "similarity_null.csv",
                    "similarity_adjusted.csv", "similarity_edges.csv"});

  // Does being alike on paper (sector, size, geography) predict disclosing
  // alike? Rank-correlate each attribute's similarity with the adjusted
  // disclosure similarity.
  const auto records = load_company_records(cfg.records_file);
  std::map<std::string, const CompanyRecord*> by_id;
  for (const auto& r : records) by_id[r.company_id] = &r;

  EmbeddingClient client = make_embed_client(cfg);
  std::vector<std::string> tau_rows = {
      csv_join({"feature", "kind", "pairs", "tau", "p_value"})};
  for (const auto& spec : feature_specs()) {
    SquareMatrix feature_sim;
    if (spec.kind == "numeric") {
      std::vector<std::optional<double>> values;
      for (const auto& id : sets.company_ids) {
        auto it = by_id.find(id);
        values.push_back(it == by_id.end() ? std::nullopt
                                           : numeric_feature(*it->second, spec.name));
      }
      feature_sim = numeric_feature_similarity(sets.company_ids, values);
    } else {
      std::vector<std::optional<std::string>> values;
      for (const auto& id : sets.company_ids) {
        auto it = by_id.find(id);
        values.push_back(it == by_id.end() ? std::nullopt
                                           : textual_feature(*it->second, spec.name));
      }
      feature_sim = textual_feature_similarity(sets.company_ids, values, client);
    }
    const std::string file = "feature_sim_" + spec.slug + ".csv";
    write_file(dir_of(cfg, Stage::analyze) / file, matrix_to_csv(feature_sim));
    artifacts.push_back(file);

    std::vector<double> x, y;
    const std::size_t n = sets.company_ids.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (std::isnan(feature_sim.at(i, j))) continue;
        x.push_back(sim.adjusted.at(i, j));
        y.push_back(feature_sim.at(i, j));
      }
    }
    std::string tau_cell, p_cell;
    if (x.size() >= 2) {
      try {
        const KendallResult kr = kendall_tau(x, y);
        tau_cell = format_double(kr.tau);
        p_cell = format_double(kr.p_value);
      } catch (const DegenerateInput&) {
        // all pairs tied: correlation undefined, cells stay empty
      }
    }
    tau_rows.push_back(
        csv_join({spec.name, spec.kind, std::to_string(x.size()), tau_cell, p_cell}));
  }
  write_file(dir_of(cfg, Stage::analyze) / "rank_correlation.csv", join_lines(tau_rows));
  artifacts.push_back("rank_correlation.csv");

  write_stage_manifest(cfg, Stage::analyze, std::move(artifacts));
}

std::string features_to_csv(const FeatureMatrix& m) {
  std::vector<std::string> rows;
  std::vector<std::string> header = {"company_id"};
  header.insert(header.end(), m.columns.begin(), m.columns.end());
  rows.push_back(csv_join(header));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::vector<std::string> row = {m.row_ids[r]};
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(format_double(m.at(r, c)));
    rows.push_back(csv_join(row));
  }
  return join_lines(rows);
}

void run_interpret(const RunConfig& cfg) {
  const auto triples = triples_from_jsonl(
      read_artifact(cfg, Stage::consolidate, "triples.jsonl"), "triples.jsonl");

  std::set<std::string> with_triples;
  for (const auto& t : triples) with_triples.insert(t.company_id);
  auto records = load_company_records(cfg.records_file);
  std::erase_if(records, [&](const CompanyRecord& r) {
    return !with_triples.count(r.company_id);
  });
  std::sort(records.begin(), records.end(),
            [](const CompanyRecord& a, const CompanyRecord& b) {
              return a.company_id < b.company_id;
            });
  if (records.empty())
    throw ConfigInvalid("no company has both a record and extracted triples");

  const auto pillar_map = load_pillar_map(cfg.pillar_map_file);
  EmbeddingClient client = make_embed_client(cfg);
  const FeatureMatrix raw =
      build_features(triples, records, pillar_map, client, cfg.regression.pillar_floor);
  FeatureMatrix standardized = raw;
  standardize(standardized);

  std::vector<double> y;
  for (const auto& r : records) y.push_back(r.esg_combined);
  const LinearModel model =
      fit_elastic_net(standardized, y, cfg.regression.grid, cfg.regression.folds, cfg.seed);

  std::vector<double> y_hat;
  for (std::size_t r = 0; r < standardized.rows(); ++r) {
    double pred = model.intercept;
    for (std::size_t c = 0; c < standardized.cols(); ++c)
      pred += standardized.at(r, c) * model.weights[c];
    y_hat.push_back(pred);
  }

  ordered_json model_json;
  model_json["intercept"] = model.intercept;
  model_json["alpha"] = model.alpha;
  model_json["l1_ratio"] = model.l1_ratio;
  model_json["seed"] = cfg.seed;
  model_json["folds"] = cfg.regression.folds;
  model_json["cv_error"] = model.cv_error;
  model_json["converged"] = model.converged;
  model_json["sweeps"] = model.sweeps;
  ordered_json weights;
  for (std::size_t c = 0; c < model.columns.size(); ++c)
    weights[model.columns[c]] = model.weights[c];
  model_json["weights"] = std::move(weights);

  std::vector<std::string> pred_rows = {
      csv_join({"company_id", "actual", "predicted", "residual"})};
  std::vector<double> residuals;
  for (std::size_t r = 0; r < records.size(); ++r) {
    residuals.push_back(y[r] - y_hat[r]);
    pred_rows.push_back(csv_join({records[r].company_id, format_double(y[r]),
                                  format_double(y_hat[r]),
                                  format_double(residuals.back())}));
  }

  std::vector<ShapExplanation> explanations;
  std::vector<std::string> shap_rows = {csv_join({"company_id", "feature", "phi"})};
  for (std::size_t r = 0; r < standardized.rows(); ++r) {
    explanations.push_back(shap_linear(model, standardized, r));
    for (std::size_t c = 0; c < standardized.cols(); ++c)
      shap_rows.push_back(csv_join({standardized.row_ids[r], standardized.columns[c],
                                    format_double(explanations.back().phi[c])}));
  }
  std::vector<std::string> summary_rows = {
      csv_join({"feature", "mean_phi", "mean_abs_phi", "median_phi"})};
  for (const auto& row : shap_summary(explanations, standardized.columns)) {
    summary_rows.push_back(csv_join({row.feature, format_double(row.mean_phi),
                                     format_double(row.mean_abs_phi),
                                     format_double(row.median_phi)}));
  }

  const RegressionMetrics metrics = regression_metrics(y, y_hat);
  ordered_json metrics_json;
  metrics_json["r2"] = metrics.r2;
  metrics_json["rmse"] = metrics.rmse;
  metrics_json["wmape"] = metrics.wmape;
  try {
    const NormalityTest nt = residual_normality(residuals);
    metrics_json["ad_statistic"] = nt.ad_statistic;
    metrics_json["ad_p_value"] = nt.p_value;
  } catch (const TooFewSamples&) {
    metrics_json["ad_statistic"] = nullptr;
    metrics_json["ad_p_value"] = nullptr;
  } catch (const ZeroVariance&) {
    metrics_json["ad_statistic"] = nullptr;
    metrics_json["ad_p_value"] = nullptr;
  }

  const fs::path dir = dir_of(cfg, Stage::interpret);
  write_file(dir / "features.csv", features_to_csv(raw));
  write_file(dir / "features_standardized.csv", features_to_csv(standardized));
  write_file(dir / "model.json", model_json.dump(2) + "\n");
  write_file(dir / "predictions.csv", join_lines(pred_rows));
  write_file(dir / "shap.csv", join_lines(shap_rows));
  write_file(dir / "shap_summary.csv", join_lines(summary_rows));
  write_file(dir / "metrics.json", metrics_json.dump(2) + "\n");
  write_stage_manifest(cfg, Stage::interpret,
                       {"features.csv", "features_standardized.csv", "model.json",
                        "predictions.csv", "shap.csv", "shap_summary.csv",
                        "metrics.json"});
}

void execute(Stage stage, const RunConfig& cfg) {
  switch (stage) {
    case Stage::ingest: run_ingest(cfg); break;
    case Stage::search: run_search(cfg); break;
    case Stage::extract: run_extract(cfg); break;
    case Stage::consolidate: run_consolidate(cfg); break;
    case Stage::graph: run_graph(cfg); break;
    case Stage::analyze: run_analyze(cfg); break;
    case Stage::interpret: run_interpret(cfg); break;
    case Stage::all: break;  // handled by run()
  }
}

}  // namespace

bool stage_complete(const RunConfig& cfg, Stage stage) {
  const fs::path dir = dir_of(cfg, stage);
  std::string content;
  try {
    content = read_file(dir / "manifest.json");
  } catch (const UnreadableFile&) {
    return false;
  }
  const json j = json::parse(content, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return false;
  if (!j.contains("stage") || j["stage"] != stage_name(stage)) return false;
  if (!j.contains("config_hash") || j["config_hash"] != config_hash(cfg)) return false;
  if (!j.contains("artifacts") || !j["artifacts"].is_array()) return false;
  for (const auto& a : j["artifacts"]) {
    if (!a.is_string()) return false;
    if (!fs::exists(dir / a.get<std::string>())) return false;
  }
  return true;
}

std::vector<StageOutcome> run(Stage stage, const RunConfig& cfg, bool force) {
  std::vector<StageOutcome> outcomes;
  auto run_one = [&](Stage s) {
    if (!force && stage_complete(cfg, s)) {
      outcomes.push_back({s, true});
      return;
    }
    execute(s, cfg);
    outcomes.push_back({s, false});
  };

  if (stage == Stage::all) {
    for (Stage s : kChain) run_one(s);
    return outcomes;
  }

  for (Stage s : kChain) {
    if (s == stage) break;
    if (!stage_complete(cfg, s))
      throw MissingArtifact("stage '" + stage_name(s) + "' has no artifacts under " +
                            dir_of(cfg, s).string() + "; run it first");
  }
  run_one(stage);
  return outcomes;
}

}  // namespace esgkg
