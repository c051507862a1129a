#include "esgkg/extraction.hpp"

#include <atomic>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "esgkg/errors.hpp"
#include "esgkg/io.hpp"

namespace esgkg {

using json = nlohmann::json;

SemanticSchema SemanticSchema::with_categories(const std::vector<std::string>& categories) {
  std::string cat_desc = "an issue related to an ESG aspect";
  if (!categories.empty()) {
    cat_desc += ", such as: ";
    for (std::size_t i = 0; i < categories.size(); ++i) {
      if (i) cat_desc += ", ";
      cat_desc += categories[i];
    }
  }
  return SemanticSchema{{
      {"esg_category", cat_desc},
      {"predicate", "a nominalised verb affecting that aspect"},
      {"object", "an entity undergoing the predicate"},
  }};
}

std::string action_canonical(const std::string& cat, const std::string& pred) {
  std::string out;
  out.reserve(cat.size() + 1 + pred.size());
  for (char c : cat) out += to_upper_ascii(c);
  out += ':';
  out += pred;
  return out;
}

namespace {

const char* kPromptHeader =
    "Your goal is to extract structured information from the user's input that "
    "matches the form described below. When extracting information please make "
    "sure it matches the type of information exactly. Do not add any attributes "
    "that do not appear in the schema shown below.";

const char* kPromptInstructions =
    "Please output the extracted information in JSON format. Do not output "
    "anything except for the extracted information. Do not add any clarifying "
    "information. Do not add any fields that are not in the schema. If the text "
    "contains attributes that do not appear in the schema, please ignore them. "
    "All output must be in JSON format and follow the schema specified above. "
    "Wrap the JSON in <json> tags.";

std::string serialize_schema(const SemanticSchema& schema) {
  std::string out = "esg_actions: Array<{\n";
  for (const auto& attr : schema.attributes) {
    out += " ";
    out += attr.name;
    out += ": string // ";
    out += attr.description;
    out += "\n";
  }
  out += "}>";
  return out;
}

std::string json_escape(const std::string& s) {
  return json(s).dump();  // includes the surrounding quotes
}

}  // namespace

std::string serialize_triples(std::span<const TripleFields> triples) {
  // Hand-rolled so the key order follows the schema; a json object would
  // re-sort keys alphabetically and break byte-stable prompts.
  std::string out = "<json>{\"esg_actions\": [";
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (i) out += ", ";
    out += "{\"esg_category\": " + json_escape(triples[i].cat) +
           ", \"predicate\": " + json_escape(triples[i].pred) +
           ", \"object\": " + json_escape(triples[i].obj) + "}";
  }
  out += "]}</json>";
  return out;
}

std::string compile_prompt(const SemanticSchema& schema,
                           const std::vector<LabelledExample>& examples,
                           const std::string& input,
                           const AblationFlags& flags) {
  std::string prompt = kPromptHeader;
  prompt += "\n\n";
  if (flags.include_schema) {
    prompt += serialize_schema(schema);
    prompt += "\n\n";
  }
  prompt += kPromptInstructions;
  prompt += "\n\n";
  if (flags.include_examples && !examples.empty()) {
    for (const auto& example : examples) {
      prompt += "input: " + example.input + "\n";
      prompt += "output: " + serialize_triples(example.output) + "\n\n";
    }
  }
  prompt += "input: " + input + "\noutput:";
  return prompt;
}

namespace {

std::string collapse_ws(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    const bool is_ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (is_ws) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += c;
  }
  return out;
}

}  // namespace

namespace {

// Connective words stay lowercase in title case unless they open the phrase,
// so "health and safety" canonicalizes to "Health and Safety".
bool lowercase_in_title(const std::string& word) {
  static const std::set<std::string> kSmall = {"a",  "an", "and", "at", "by", "for",
                                               "in", "of", "on",  "or", "the", "to",
                                               "with"};
  std::string folded = word;
  for (char& c : folded) c = to_lower_ascii(c);
  return kSmall.count(folded) > 0;
}

}  // namespace

std::string canonical_category(std::string_view s) {
  std::string out = collapse_ws(s);
  std::string result;
  result.reserve(out.size());
  std::size_t pos = 0;
  bool first_word = true;
  while (pos < out.size()) {
    std::size_t end = out.find(' ', pos);
    if (end == std::string::npos) end = out.size();
    std::string word = out.substr(pos, end - pos);
    if (!word.empty() && (first_word || !lowercase_in_title(word))) {
      word[0] = to_upper_ascii(word[0]);
    }
    if (!first_word) result += ' ';
    result += word;
    first_word = false;
    pos = end + 1;
  }
  return result;
}

std::string canonical_predicate(std::string_view s) {
  std::string out = collapse_ws(s);
  if (!out.empty()) out[0] = to_upper_ascii(out[0]);
  return out;
}

std::string canonical_object(std::string_view s) { return canonical_predicate(s); }

namespace {

// Fetches a string value under any of the accepted key spellings.
const json* find_key(const json& obj, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    auto it = obj.find(name);
    if (it != obj.end()) return &*it;
  }
  return nullptr;
}

}  // namespace

ParseOutcome parse_response(const std::string& raw) {
  const std::size_t open = raw.find("<json>");
  if (open == std::string::npos) throw MalformedResponse("missing <json> tag");
  const std::size_t start = open + 6;
  const std::size_t close = raw.find("</json>", start);
  if (close == std::string::npos) throw MalformedResponse("missing </json> tag");

  json payload = json::parse(raw.substr(start, close - start), nullptr, false);
  if (payload.is_discarded()) throw MalformedResponse("invalid JSON between tags");

  const json* actions = nullptr;
  if (payload.is_array()) {
    actions = &payload;
  } else if (payload.is_object()) {
    actions = find_key(payload, {"esg_actions", "esg actions"});
    if (!actions) throw MalformedResponse("no esg_actions key and not an array");
  } else {
    throw MalformedResponse("payload is neither object nor array");
  }
  if (!actions->is_array()) throw MalformedResponse("esg_actions is not an array");

  ParseOutcome outcome;
  for (const auto& item : *actions) {
    if (!item.is_object()) {
      ++outcome.skipped;
      continue;
    }
    const json* cat = find_key(item, {"esg_category", "esg category"});
    const json* pred = find_key(item, {"predicate"});
    const json* obj = find_key(item, {"object"});
    if (!cat || !pred || !obj || !cat->is_string() || !pred->is_string() ||
        !obj->is_string()) {
      ++outcome.skipped;
      continue;
    }
    TripleFields fields{canonical_category(cat->get<std::string>()),
                        canonical_predicate(pred->get<std::string>()),
                        canonical_object(obj->get<std::string>())};
    if (fields.cat.empty() || fields.pred.empty() || fields.obj.empty()) {
      ++outcome.skipped;
      continue;
    }
    outcome.triples.push_back(std::move(fields));
  }
  return outcome;
}

ExtractionResult extract_triples(const std::vector<Sentence>& sentences,
                                 GenerationClient& client,
                                 const SemanticSchema& schema,
                                 const std::vector<LabelledExample>& examples,
                                 const GenerationConfig& config,
                                 const AblationFlags& flags) {
  ExtractionResult result;
  if (sentences.empty()) return result;

  std::vector<ParseOutcome> outcomes(sentences.size());
  std::vector<char> malformed(sentences.size(), 0);

  parallel_for(sentences.size(), client.parallelism(), [&](std::size_t i) {
    const std::string prompt = compile_prompt(schema, examples, sentences[i].text, flags);
    const std::string reply = client.generate(prompt, config);
    try {
      outcomes[i] = parse_response(reply);
    } catch (const MalformedResponse&) {
      malformed[i] = 1;  // tolerated: the sentence simply contributes nothing
    }
  });

  std::size_t covered = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (malformed[i]) {
      ++result.malformed_responses;
      continue;
    }
    result.skipped_triples += outcomes[i].skipped;
    if (!outcomes[i].triples.empty()) ++covered;
    for (auto& fields : outcomes[i].triples) {
      result.triples.push_back({std::move(fields.cat), std::move(fields.pred),
                                std::move(fields.obj), sentences[i].company_id,
                                sentences[i].doc_index});
    }
  }
  result.coverage = sentences.empty()
                        ? 0.0
                        : static_cast<double>(covered) / static_cast<double>(sentences.size());
  return result;
}

std::string compile_evaluation_prompt(const std::string& sentence,
                                      const TripleFields& triple) {
  std::string prompt =
      "Your goal is to evaluate the coherence and alignment between a sentence "
      "and the structured information extracted from it. Rate each extracted "
      "attribute with an integer from 0 (incoherent or unsupported) to 3 (fully "
      "coherent and aligned with the sentence). All output must be in JSON "
      "format with the keys cat_score, pred_score and obj_score. Wrap the JSON "
      "in <json> tags.\n\n";
  prompt += "input: {\"sentence\": " + json(sentence).dump() +
            ", \"esg_category\": " + json(triple.cat).dump() +
            ", \"predicate\": " + json(triple.pred).dump() +
            ", \"object\": " + json(triple.obj).dump() + "}\noutput:";
  return prompt;
}

std::vector<TripleEvaluation> evaluate_triples(
    const std::vector<std::pair<std::string, TripleFields>>& items,
    GenerationClient& client, const GenerationConfig& config) {
  std::vector<TripleEvaluation> out(items.size());

  parallel_for(items.size(), client.parallelism(), [&](std::size_t i) {
    const std::string prompt = compile_evaluation_prompt(items[i].first, items[i].second);
    const std::string reply = client.generate(prompt, config);

    const std::size_t open = reply.find("<json>");
    if (open == std::string::npos) return;
    const std::size_t close = reply.find("</json>", open + 6);
    if (close == std::string::npos) return;
    json payload = json::parse(reply.substr(open + 6, close - open - 6), nullptr, false);
    if (payload.is_discarded() || !payload.is_object()) return;

    auto read_score = [&](const char* key) -> int {
      auto it = payload.find(key);
      if (it == payload.end() || !it->is_number()) return -1;
      const double v = it->get<double>();
      const int rounded = static_cast<int>(std::llround(v));
      if (rounded < 0 || rounded > 3 || std::abs(v - rounded) > 1e-9) return -1;
      return rounded;
    };
    TripleEvaluation eval;
    eval.cat_score = read_score("cat_score");
    eval.pred_score = read_score("pred_score");
    eval.obj_score = read_score("obj_score");
    if (eval.cat_score < 0 || eval.pred_score < 0 || eval.obj_score < 0) return;
    eval.avg = (eval.cat_score + eval.pred_score + eval.obj_score) / 3.0;
    eval.evaluated = true;
    out[i] = eval;
  });
  return out;
}

std::vector<LabelledExample> load_examples(const std::filesystem::path& path) {
  json parsed = json::parse(read_file(path), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array())
    throw ConfigInvalid("example file must be a JSON array: " + path.string());
  std::vector<LabelledExample> out;
  for (const auto& entry : parsed) {
    if (!entry.is_object() || !entry.contains("input") || !entry.contains("output"))
      throw ConfigInvalid("each example needs input and output: " + path.string());
    LabelledExample example;
    example.input = entry["input"].get<std::string>();
    for (const auto& item : entry["output"]) {
      const json* cat = find_key(item, {"esg_category", "esg category"});
      const json* pred = find_key(item, {"predicate"});
      const json* obj = find_key(item, {"object"});
      if (!cat || !pred || !obj)
        throw ConfigInvalid("example output triple missing attribute: " + path.string());
      example.output.push_back({cat->get<std::string>(), pred->get<std::string>(),
                                obj->get<std::string>()});
    }
    out.push_back(std::move(example));
  }
  return out;
}

}  // namespace esgkg
