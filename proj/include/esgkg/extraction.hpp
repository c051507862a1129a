#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "esgkg/clients.hpp"
#include "esgkg/corpus.hpp"

namespace esgkg {

struct SchemaAttribute {
  std::string name;
  std::string description;
};

// The extraction schema handed to the model: a category grounded in the
// reference taxonomy, a nominalised predicate, and the entity acted upon.
struct SemanticSchema {
  std::vector<SchemaAttribute> attributes;

  // Default schema with the reference category list folded into the
  // esg_category description so the model can anchor its labels.
  static SemanticSchema with_categories(const std::vector<std::string>& categories);
};

struct TripleFields {
  std::string cat;
  std::string pred;
  std::string obj;

  bool operator==(const TripleFields&) const = default;
};

struct LabelledExample {
  std::string input;
  std::vector<TripleFields> output;
};

struct EsgTriple {
  std::string cat;
  std::string pred;
  std::string obj;
  std::string company_id;
  int doc_index = 0;

  bool operator==(const EsgTriple&) const = default;
};

struct AblationFlags {
  bool include_schema = true;
  bool include_examples = true;
};

// Canonical action label: the category uppercased, a colon, the predicate.
std::string action_canonical(const std::string& cat, const std::string& pred);

// Prompt assembly. The output is byte-stable: same schema, examples, flags
// and input always produce the identical string, and distinct inputs always
// produce distinct prompts. Ablation flags drop the corresponding block and
// its separator, nothing else.
std::string compile_prompt(const SemanticSchema& schema,
                           const std::vector<LabelledExample>& examples,
                           const std::string& input,
                           const AblationFlags& flags = {});

// Serializes triples the way the model is asked to reply, with keys in
// schema order. parse_response(serialize_triples(ts)) round-trips exactly.
std::string serialize_triples(std::span<const TripleFields> triples);

struct ParseOutcome {
  std::vector<TripleFields> triples;  // canonicalized
  int skipped = 0;                    // items missing a required attribute
};

// Accepts the first <json>...</json> span. The payload may be an object
// keyed "esg_actions" or "esg actions", or a bare array. Attribute keys
// may spell the category "esg_category" or "esg category". Anything less
// structured throws MalformedResponse; individual items missing a required
// attribute are skipped and counted.
ParseOutcome parse_response(const std::string& raw);

// Surface-form canonicalization applied to every parsed triple.
std::string canonical_category(std::string_view s);   // each word capitalized
std::string canonical_predicate(std::string_view s);  // first letter capitalized
std::string canonical_object(std::string_view s);     // sentence case

struct ExtractionResult {
  std::vector<EsgTriple> triples;
  double coverage = 0.0;       // fraction of sentences yielding at least one triple
  int malformed_responses = 0;
  int skipped_triples = 0;
};

// Prompts the model once per sentence (bounded by the client's parallelism)
// and gathers canonicalized triples with provenance, in sentence order.
ExtractionResult extract_triples(const std::vector<Sentence>& sentences,
                                 GenerationClient& client,
                                 const SemanticSchema& schema,
                                 const std::vector<LabelledExample>& examples,
                                 const GenerationConfig& config = {},
                                 const AblationFlags& flags = {});

struct TripleEvaluation {
  int cat_score = -1;   // 0..3 once evaluated
  int pred_score = -1;
  int obj_score = -1;
  double avg = 0.0;
  bool evaluated = false;
};

// Model-scored quality review: for each (sentence, triple) pair the model
// rates how well each attribute reflects the sentence on a 0..3 scale.
// Replies that do not parse leave the entry unevaluated.
std::vector<TripleEvaluation> evaluate_triples(
    const std::vector<std::pair<std::string, TripleFields>>& items,
    GenerationClient& client, const GenerationConfig& config = {});

std::string compile_evaluation_prompt(const std::string& sentence,
                                      const TripleFields& triple);

// Example file: JSON array of {"input": str, "output": [triple...]}.
std::vector<LabelledExample> load_examples(const std::filesystem::path& path);

}  // namespace esgkg
