#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace esgkg {

struct EmbeddingVector {
  std::vector<double> values;
  double norm() const;
};

struct GenerationConfig {
  double temperature = 0.0;  // greedy decoding by default
  int num_beams = 6;
  int max_tokens = 512;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};  // doubles per retry
};

// ---------------------------------------------------------------------------
// Embedding side

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  // One raw vector per text, in input order. Need not be normalized.
  virtual std::vector<std::vector<double>> embed_batch(
      const std::string& instruction, const std::vector<std::string>& texts) = 0;
};

// Offline stand-in used whenever no service is configured. Each lowercased
// alphanumeric token maps to a fixed pseudo-random direction derived from
// its hash; a text embeds to the normalized sum of its token directions,
// with function words downweighted so shared content words dominate.
// Texts sharing words are therefore similar, identical texts identical,
// and the whole pipeline stays reproducible with no network at all.
class StubEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit StubEmbeddingBackend(std::size_t dim = 1024);
  std::vector<std::vector<double>> embed_batch(
      const std::string& instruction, const std::vector<std::string>& texts) override;
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
};

// Talks to POST {base_url}/embed with {"instruction": str, "texts": [str]}
// and expects {"vectors": [[number]]}. Connection errors and 5xx responses
// are retried with exponential backoff, then ServiceUnavailable.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(std::string base_url, RetryPolicy retry = {});
  std::vector<std::vector<double>> embed_batch(
      const std::string& instruction, const std::vector<std::string>& texts) override;

 private:
  std::string base_url_;
  RetryPolicy retry_;
};

// Caching front door for embeddings. Results are unit-normalized, cached in
// memory under the (instruction, text) pair and, when cache_dir is set,
// persisted to disk keyed by the SHA-256 of that pair. Thread safe.
class EmbeddingClient {
 public:
  explicit EmbeddingClient(std::shared_ptr<EmbeddingBackend> backend,
                           std::filesystem::path cache_dir = {},
                           int parallelism = 8);

  std::vector<EmbeddingVector> embed(const std::string& instruction,
                                     const std::vector<std::string>& texts);

  int parallelism() const { return parallelism_; }

 private:
  std::shared_ptr<EmbeddingBackend> backend_;
  std::filesystem::path cache_dir_;
  int parallelism_;
  std::mutex mutex_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
};

// ---------------------------------------------------------------------------
// Generation side

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string generate(const std::string& prompt,
                               const GenerationConfig& config) = 0;
};

// Offline stand-in holding scripted replies. A reply is keyed by the text
// of the final "input:" line of the prompt, which is where every prompt in
// this pipeline carries its payload sentence. Unknown inputs produce an
// empty extraction so downstream stages always see valid JSON.
class ScriptedGenerationBackend final : public GenerationBackend {
 public:
  ScriptedGenerationBackend() = default;

  void add_reply(const std::string& input_text, const std::string& reply);
  static std::string extract_input_text(const std::string& prompt);
  // JSON file mapping input text to reply text.
  static std::shared_ptr<ScriptedGenerationBackend> from_file(
      const std::filesystem::path& path);

  std::string generate(const std::string& prompt,
                       const GenerationConfig& config) override;

  int calls() const { return calls_; }

 private:
  std::unordered_map<std::string, std::string> replies_;
  int calls_ = 0;
};

// Talks to POST {base_url}/generate with
// {"prompt": str, "temperature": number, "num_beams": int, "max_tokens": int}
// and expects {"text": str}. HTTP 413 means the service refused to fit the
// request or completion in its window and maps to ResponseTooLong; other
// failures are retried, then ServiceUnavailable.
class HttpGenerationBackend final : public GenerationBackend {
 public:
  explicit HttpGenerationBackend(std::string base_url, RetryPolicy retry = {});
  std::string generate(const std::string& prompt,
                       const GenerationConfig& config) override;

 private:
  std::string base_url_;
  RetryPolicy retry_;
};

// Caching front door for generations, keyed by (prompt, config). Thread safe.
class GenerationClient {
 public:
  explicit GenerationClient(std::shared_ptr<GenerationBackend> backend,
                            std::filesystem::path cache_dir = {},
                            int parallelism = 8);

  std::string generate(const std::string& prompt, const GenerationConfig& config);

  int parallelism() const { return parallelism_; }

 private:
  std::shared_ptr<GenerationBackend> backend_;
  std::filesystem::path cache_dir_;
  int parallelism_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::string> cache_;
};

// Backend selection: EMBED_URL / LLM_URL environment variables pick the
// HTTP services; otherwise the deterministic offline stubs are used.
std::shared_ptr<EmbeddingBackend> embedding_backend_from_env(std::size_t stub_dim = 1024);
std::shared_ptr<GenerationBackend> generation_backend_from_env(
    const std::optional<std::filesystem::path>& scripted_replies = std::nullopt);

}  // namespace esgkg
