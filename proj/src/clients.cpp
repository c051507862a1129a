#include "esgkg/clients.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "esgkg/errors.hpp"
#include "esgkg/io.hpp"
#include "esgkg/rng.hpp"

namespace esgkg {

using json = nlohmann::json;

double EmbeddingVector::norm() const {
  double acc = 0.0;
  for (double v : values) acc += v * v;
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Stub embedding backend

StubEmbeddingBackend::StubEmbeddingBackend(std::size_t dim) : dim_(dim) {}

namespace {

// Function words would otherwise dominate the similarity of any two English
// sentences, so they carry a fraction of a content token's weight.
bool function_word(std::string_view token) {
  static constexpr std::string_view kWords[] = {
      "a", "an", "and", "are", "as", "at", "be", "been", "by", "for", "from",
      "in", "into", "is", "it", "its", "of", "on", "or", "our", "that", "the",
      "this", "to", "was", "we", "were", "with"};
  for (std::string_view w : kWords)
    if (token == w) return true;
  return false;
}

void add_token_direction(std::vector<double>& acc, std::string_view token) {
  const double weight = function_word(token) ? 0.25 : 1.0;
  SplitMix64 rng(fnv1a64(token));
  for (double& a : acc) a += weight * rng.next_symmetric();
}

std::vector<double> stub_vector(std::string_view text, std::size_t dim) {
  std::vector<double> acc(dim, 0.0);
  std::string token;
  bool any_token = false;
  for (char c : text) {
    if (ascii_alnum(c)) {
      token += to_lower_ascii(c);
    } else if (!token.empty()) {
      add_token_direction(acc, token);
      any_token = true;
      token.clear();
    }
  }
  if (!token.empty()) {
    add_token_direction(acc, token);
    any_token = true;
  }
  if (!any_token) {
    // Punctuation-only input still deserves a stable nonzero direction.
    SplitMix64 rng(fnv1a64(text) ^ 0x5bd1e995u);
    for (double& a : acc) a += rng.next_symmetric();
  }
  double norm = 0.0;
  for (double a : acc) norm += a * a;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& a : acc) a /= norm;
  return acc;
}

}  // namespace

std::vector<std::vector<double>> StubEmbeddingBackend::embed_batch(
    const std::string& /*instruction*/, const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) out[i] = stub_vector(texts[i], dim_);
  return out;
}

// ---------------------------------------------------------------------------
// HTTP plumbing shared by both backends

namespace {

struct HttpReply {
  int status = 0;
  std::string body;
};

// POSTs JSON and retries per policy. Returns the first 2xx reply. A 413 is
// surfaced immediately through `payload_too_large`. Everything else, after
// the attempts run out, becomes ServiceUnavailable.
HttpReply post_with_retry(const std::string& base_url, const std::string& route,
                          const std::string& body, const RetryPolicy& retry,
                          bool* payload_too_large) {
  std::string last_error = "no attempts made";
  auto backoff = retry.initial_backoff;
  for (int attempt = 0; attempt < retry.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(base_url);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(600, 0);
    auto res = client.Post(route, body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 413) {
      if (payload_too_large) *payload_too_large = true;
      return {res->status, res->body};
    }
    if (res->status >= 200 && res->status < 300) return {res->status, res->body};
    last_error = "HTTP " + std::to_string(res->status);
    if (res->status >= 400 && res->status < 500) break;  // not retryable
  }
  throw ServiceUnavailable(base_url + route + " (" + last_error + ")");
}

json parse_service_json(const std::string& body, const std::string& what) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded())
    throw ServiceUnavailable(what + " returned invalid JSON");
  return parsed;
}

}  // namespace

HttpEmbeddingBackend::HttpEmbeddingBackend(std::string base_url, RetryPolicy retry)
    : base_url_(std::move(base_url)), retry_(retry) {}

std::vector<std::vector<double>> HttpEmbeddingBackend::embed_batch(
    const std::string& instruction, const std::vector<std::string>& texts) {
  json request = {{"instruction", instruction}, {"texts", texts}};
  auto reply = post_with_retry(base_url_, "/embed", request.dump(), retry_, nullptr);
  json parsed = parse_service_json(reply.body, "embedding service");
  if (!parsed.contains("vectors") || !parsed["vectors"].is_array())
    throw ServiceUnavailable("embedding service reply lacks \"vectors\"");
  std::vector<std::vector<double>> out;
  out.reserve(parsed["vectors"].size());
  for (const auto& vec : parsed["vectors"]) {
    if (!vec.is_array()) throw ServiceUnavailable("embedding vector is not an array");
    out.push_back(vec.get<std::vector<double>>());
  }
  if (out.size() != texts.size())
    throw DimensionMismatch("embedding service returned " + std::to_string(out.size()) +
                            " vectors for " + std::to_string(texts.size()) + " texts");
  return out;
}

// ---------------------------------------------------------------------------
// Embedding client

EmbeddingClient::EmbeddingClient(std::shared_ptr<EmbeddingBackend> backend,
                                 std::filesystem::path cache_dir, int parallelism)
    : backend_(std::move(backend)),
      cache_dir_(std::move(cache_dir)),
      parallelism_(parallelism < 1 ? 1 : parallelism) {}

namespace {

std::string embed_cache_key(const std::string& instruction, const std::string& text) {
  // \x1f keeps ("a", "b c") and ("a b", "c") from colliding.
  return sha256_hex(instruction + '\x1f' + text);
}

EmbeddingVector normalized_or_throw(std::vector<double> raw, std::size_t expect_dim) {
  for (double v : raw) {
    if (!std::isfinite(v)) throw ServiceUnavailable("embedding has non-finite entries");
  }
  if (expect_dim != 0 && raw.size() != expect_dim)
    throw DimensionMismatch("embedding dimensions differ within one batch: " +
                            std::to_string(raw.size()) + " vs " + std::to_string(expect_dim));
  EmbeddingVector vec{std::move(raw)};
  const double n = vec.norm();
  if (n == 0.0) throw ZeroVector("embedding backend returned a zero vector");
  for (double& v : vec.values) v /= n;
  return vec;
}

}  // namespace

std::vector<EmbeddingVector> EmbeddingClient::embed(const std::string& instruction,
                                                    const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::size_t> missing;
  std::vector<std::string> missing_texts;

  {
    std::lock_guard<std::mutex> lock(mutex_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const std::string key = embed_cache_key(instruction, texts[i]);
      auto hit = cache_.find(key);
      if (hit != cache_.end()) {
        out[i] = hit->second;
        continue;
      }
      if (!cache_dir_.empty()) {
        const auto path = cache_dir_ / ("emb_" + key + ".json");
        std::error_code ec;
        if (std::filesystem::exists(path, ec)) {
          json stored = json::parse(read_file(path), nullptr, false);
          if (!stored.is_discarded() && stored.contains("vector")) {
            EmbeddingVector vec{stored["vector"].get<std::vector<double>>()};
            cache_.emplace(key, vec);
            out[i] = std::move(vec);
            continue;
          }
        }
      }
      missing.push_back(i);
      missing_texts.push_back(texts[i]);
    }
  }

  if (missing.empty()) return out;  // includes the empty-input case

  auto raw = backend_->embed_batch(instruction, missing_texts);
  if (raw.size() != missing_texts.size())
    throw DimensionMismatch("backend returned wrong batch size");

  const std::size_t dim = raw.empty() ? 0 : raw[0].size();
  std::lock_guard<std::mutex> lock(mutex_);
  for (std::size_t k = 0; k < missing.size(); ++k) {
    EmbeddingVector vec = normalized_or_throw(std::move(raw[k]), dim);
    const std::string key = embed_cache_key(instruction, missing_texts[k]);
    if (!cache_dir_.empty()) {
      json stored;
      stored["instruction"] = instruction;
      stored["text"] = missing_texts[k];
      stored["vector"] = vec.values;
      write_file(cache_dir_ / ("emb_" + key + ".json"), stored.dump());
    }
    cache_[key] = vec;
    out[missing[k]] = std::move(vec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scripted generation backend

namespace {
const char* kEmptyExtraction = "<json>{\"esg_actions\": []}</json>";
}

void ScriptedGenerationBackend::add_reply(const std::string& input_text,
                                          const std::string& reply) {
  replies_[input_text] = reply;
}

std::string ScriptedGenerationBackend::extract_input_text(const std::string& prompt) {
  const std::string marker = "input: ";
  const std::size_t start = prompt.rfind(marker);
  if (start == std::string::npos) return "";
  const std::size_t from = start + marker.size();
  std::size_t end = prompt.find("\noutput:", from);
  if (end == std::string::npos) end = prompt.size();
  return prompt.substr(from, end - from);
}

std::shared_ptr<ScriptedGenerationBackend> ScriptedGenerationBackend::from_file(
    const std::filesystem::path& path) {
  json parsed = json::parse(read_file(path), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object())
    throw ConfigInvalid("scripted replies must be a JSON object: " + path.string());
  auto backend = std::make_shared<ScriptedGenerationBackend>();
  for (const auto& [input, reply] : parsed.items()) {
    if (!reply.is_string())
      throw ConfigInvalid("scripted reply for \"" + input + "\" is not a string");
    backend->add_reply(input, reply.get<std::string>());
  }
  return backend;
}

std::string ScriptedGenerationBackend::generate(const std::string& prompt,
                                                const GenerationConfig& /*config*/) {
  ++calls_;
  auto hit = replies_.find(extract_input_text(prompt));
  if (hit != replies_.end()) return hit->second;
  return kEmptyExtraction;
}

// ---------------------------------------------------------------------------
// HTTP generation backend

HttpGenerationBackend::HttpGenerationBackend(std::string base_url, RetryPolicy retry)
    : base_url_(std::move(base_url)), retry_(retry) {}

std::string HttpGenerationBackend::generate(const std::string& prompt,
                                            const GenerationConfig& config) {
  json request = {{"prompt", prompt},
                  {"temperature", config.temperature},
                  {"num_beams", config.num_beams},
                  {"max_tokens", config.max_tokens}};
  bool too_large = false;
  auto reply = post_with_retry(base_url_, "/generate", request.dump(), retry_, &too_large);
  if (too_large)
    throw ResponseTooLong("prompt plus completion exceeds the service window");
  json parsed = parse_service_json(reply.body, "generation service");
  if (!parsed.contains("text") || !parsed["text"].is_string())
    throw ServiceUnavailable("generation service reply lacks \"text\"");
  return parsed["text"].get<std::string>();
}

// ---------------------------------------------------------------------------
// Generation client

GenerationClient::GenerationClient(std::shared_ptr<GenerationBackend> backend,
                                   std::filesystem::path cache_dir, int parallelism)
    : backend_(std::move(backend)),
      cache_dir_(std::move(cache_dir)),
      parallelism_(parallelism < 1 ? 1 : parallelism) {}

namespace {

std::string generation_cache_key(const std::string& prompt, const GenerationConfig& c) {
  return sha256_hex(prompt + '\x1f' + format_double(c.temperature) + '\x1f' +
                    std::to_string(c.num_beams) + '\x1f' + std::to_string(c.max_tokens));
}

}  // namespace

std::string GenerationClient::generate(const std::string& prompt,
                                       const GenerationConfig& config) {
  const std::string key = generation_cache_key(prompt, config);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto hit = cache_.find(key);
    if (hit != cache_.end()) return hit->second;
    if (!cache_dir_.empty()) {
      const auto path = cache_dir_ / ("gen_" + key + ".json");
      std::error_code ec;
      if (std::filesystem::exists(path, ec)) {
        json stored = json::parse(read_file(path), nullptr, false);
        if (!stored.is_discarded() && stored.contains("text")) {
          std::string text = stored["text"].get<std::string>();
          cache_[key] = text;
          return text;
        }
      }
    }
  }

  std::string text = backend_->generate(prompt, config);

  std::lock_guard<std::mutex> lock(mutex_);
  if (!cache_dir_.empty()) {
    json stored;
    stored["prompt"] = prompt;
    stored["text"] = text;
    write_file(cache_dir_ / ("gen_" + key + ".json"), stored.dump());
  }
  cache_[key] = text;
  return text;
}

// ---------------------------------------------------------------------------
// Environment-based selection

std::shared_ptr<EmbeddingBackend> embedding_backend_from_env(std::size_t stub_dim) {
  const char* url = std::getenv("EMBED_URL");
  if (url && *url) return std::make_shared<HttpEmbeddingBackend>(url);
  return std::make_shared<StubEmbeddingBackend>(stub_dim);
}

std::shared_ptr<GenerationBackend> generation_backend_from_env(
    const std::optional<std::filesystem::path>& scripted_replies) {
  const char* url = std::getenv("LLM_URL");
  if (url && *url) return std::make_shared<HttpGenerationBackend>(url);
  if (scripted_replies) return ScriptedGenerationBackend::from_file(*scripted_replies);
  return std::make_shared<ScriptedGenerationBackend>();
}

}  // namespace esgkg
