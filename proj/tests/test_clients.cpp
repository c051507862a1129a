#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "esgkg/clients.hpp"
#include "esgkg/errors.hpp"
#include "esgkg/io.hpp"
#include "support.hpp"

namespace {

double dot(const esgkg::EmbeddingVector& a, const esgkg::EmbeddingVector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) acc += a.values[i] * b.values[i];
  return acc;
}

class CountingEmbedBackend final : public esgkg::EmbeddingBackend {
 public:
  explicit CountingEmbedBackend(std::size_t dim = 32) : inner_(dim) {}
  std::vector<std::vector<double>> embed_batch(
      const std::string& instruction, const std::vector<std::string>& texts) override {
    ++batches;
    texts_seen += static_cast<int>(texts.size());
    return inner_.embed_batch(instruction, texts);
  }
  int batches = 0;
  int texts_seen = 0;

 private:
  esgkg::StubEmbeddingBackend inner_;
};

// Replays whatever raw vectors the test loaded, so malformed service output
// can be simulated without a network.
class CannedEmbedBackend final : public esgkg::EmbeddingBackend {
 public:
  std::vector<std::vector<double>> raw;
  std::vector<std::vector<double>> embed_batch(const std::string&,
                                               const std::vector<std::string>&) override {
    return raw;
  }
};

class CountingGenBackend final : public esgkg::GenerationBackend {
 public:
  int calls = 0;
  std::string generate(const std::string& prompt, const esgkg::GenerationConfig&) override {
    ++calls;
    return "reply#" + std::to_string(calls) + ":" +
           esgkg::ScriptedGenerationBackend::extract_input_text(prompt);
  }
};

// Owns an httplib server on an ephemeral loopback port for wire tests.
struct TestServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
  ~TestServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

constexpr const char* kEmptyReply = "<json>{\"esg_actions\": []}</json>";

}  // namespace

TEST_CASE("stub embeddings are deterministic and ignore the instruction") {
  esgkg::StubEmbeddingBackend backend(64);
  CHECK(backend.dim() == 64);

  auto first = backend.embed_batch("find esg topics", {"water stewardship", "board pay"});
  auto second = backend.embed_batch("a totally different instruction",
                                    {"water stewardship", "board pay"});
  REQUIRE(first.size() == 2);
  REQUIRE(first[0].size() == 64);
  CHECK(first == second);
  CHECK(first[0] != first[1]);

  // Tokenization is case-insensitive and punctuation-blind.
  auto variants = backend.embed_batch("", {"Water, stewardship!", "water stewardship"});
  CHECK(variants[0] == variants[1]);

  // Punctuation-only text still maps to some stable nonzero direction.
  auto punct = backend.embed_batch("", {"?!", "?!"});
  CHECK(punct[0] == punct[1]);
  double norm = 0.0;
  for (double v : punct[0]) norm += v * v;
  CHECK(norm > 0.0);
}

TEST_CASE("embedding client normalizes and rewards shared content words") {
  auto client = testsupport::stub_embedder();
  auto vecs = client.embed("topic", {"waste", "the waste", "again waste", "energy audit"});
  REQUIRE(vecs.size() == 4);
  for (const auto& v : vecs) CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));

  // A shared content word should matter far more than a shared function word,
  // and unrelated sentences should sit near zero.
  const double with_function_word = dot(vecs[0], vecs[1]);
  const double with_content_word = dot(vecs[0], vecs[2]);
  const double unrelated = dot(vecs[0], vecs[3]);
  CHECK(with_function_word > with_content_word);
  CHECK(with_content_word > 0.5);
  CHECK(std::abs(unrelated) < 0.3);
}

TEST_CASE("embedding client reuses its in-memory cache") {
  auto backend = std::make_shared<CountingEmbedBackend>();
  esgkg::EmbeddingClient client(backend);

  auto out = client.embed("i", {"alpha", "beta"});
  CHECK(backend->batches == 1);
  CHECK(backend->texts_seen == 2);

  auto again = client.embed("i", {"alpha", "beta"});
  CHECK(backend->batches == 1);
  CHECK(again[0].values == out[0].values);

  // A new text triggers one more batch carrying only the miss.
  client.embed("i", {"alpha", "gamma"});
  CHECK(backend->batches == 2);
  CHECK(backend->texts_seen == 3);

  // The instruction is part of the key even though the stub ignores it.
  client.embed("j", {"alpha"});
  CHECK(backend->batches == 3);

  CHECK(client.embed("i", {}).empty());
  CHECK(backend->batches == 3);
}

TEST_CASE("embedding disk cache survives a fresh client") {
  testsupport::TempDir cache("embcache");

  auto first_backend = std::make_shared<CountingEmbedBackend>();
  esgkg::EmbeddingClient first(first_backend, cache.path());
  auto original = first.embed("i", {"alpha", "beta"});
  CHECK(first_backend->batches == 1);

  auto second_backend = std::make_shared<CountingEmbedBackend>();
  esgkg::EmbeddingClient second(second_backend, cache.path());
  auto replayed = second.embed("i", {"alpha", "beta"});
  CHECK(second_backend->batches == 0);
  REQUIRE(replayed.size() == 2);
  CHECK(replayed[0].values == original[0].values);
  CHECK(replayed[1].values == original[1].values);
}

TEST_CASE("embedding client rejects malformed backend output") {
  auto backend = std::make_shared<CannedEmbedBackend>();
  esgkg::EmbeddingClient client(backend);

  backend->raw = {{0.0, 0.0, 0.0}};
  CHECK_THROWS_AS(client.embed("i", {"x"}), esgkg::ZeroVector);

  backend->raw = {{1.0, 0.0}, {1.0, 0.0, 0.0}};
  CHECK_THROWS_AS(client.embed("i", {"ragged a", "ragged b"}), esgkg::DimensionMismatch);

  backend->raw = {{1.0, 0.0}};
  CHECK_THROWS_AS(client.embed("i", {"one", "two"}), esgkg::DimensionMismatch);

  backend->raw = {{std::numeric_limits<double>::quiet_NaN(), 1.0}};
  CHECK_THROWS_AS(client.embed("i", {"nan"}), esgkg::ServiceUnavailable);
}

TEST_CASE("scripted generation keys replies off the final input line") {
  esgkg::ScriptedGenerationBackend backend;
  backend.add_reply("The plant cut water use.",
                    "<json>{\"esg_actions\": [{\"esg_category\": \"Water\", "
                    "\"predicate\": \"Reduction of\", \"object\": \"Water use\"}]}</json>");

  const std::string prompt =
      "Schema goes here.\n\n"
      "input: Some worked example.\noutput: <json>{\"esg_actions\": []}</json>\n\n"
      "input: The plant cut water use.\noutput:";
  CHECK(esgkg::ScriptedGenerationBackend::extract_input_text(prompt) ==
        "The plant cut water use.");
  CHECK(esgkg::ScriptedGenerationBackend::extract_input_text("no marker here") == "");

  esgkg::GenerationConfig config;
  CHECK(backend.generate(prompt, config).find("Reduction of") != std::string::npos);
  CHECK(backend.generate("input: Unknown sentence.\noutput:", config) == kEmptyReply);
  CHECK(backend.calls() == 2);
}

TEST_CASE("scripted replies load from a json file") {
  testsupport::TempDir dir("scripted");

  esgkg::write_file(dir.path() / "replies.json",
                    "{\"Known input.\": \"<json>{\\\"esg_actions\\\": []}</json>\"}");
  auto backend = esgkg::ScriptedGenerationBackend::from_file(dir.path() / "replies.json");
  esgkg::GenerationConfig config;
  CHECK(backend->generate("input: Known input.\noutput:", config) == kEmptyReply);

  esgkg::write_file(dir.path() / "not_object.json", "[1, 2]");
  CHECK_THROWS_AS(esgkg::ScriptedGenerationBackend::from_file(dir.path() / "not_object.json"),
                  esgkg::ConfigInvalid);

  esgkg::write_file(dir.path() / "bad_value.json", "{\"Known input.\": 7}");
  CHECK_THROWS_AS(esgkg::ScriptedGenerationBackend::from_file(dir.path() / "bad_value.json"),
                  esgkg::ConfigInvalid);
}

TEST_CASE("generation client caches by prompt and decoding settings") {
  testsupport::TempDir cache("gencache");
  auto backend = std::make_shared<CountingGenBackend>();
  esgkg::GenerationClient client(backend, cache.path());

  esgkg::GenerationConfig config;
  const std::string prompt = "input: Sentence.\noutput:";
  const std::string first = client.generate(prompt, config);
  CHECK(client.generate(prompt, config) == first);
  CHECK(backend->calls == 1);

  esgkg::GenerationConfig wider = config;
  wider.max_tokens = config.max_tokens * 2;
  client.generate(prompt, wider);
  CHECK(backend->calls == 2);

  // A brand-new client over the same directory replays from disk.
  auto cold_backend = std::make_shared<CountingGenBackend>();
  esgkg::GenerationClient cold(cold_backend, cache.path());
  CHECK(cold.generate(prompt, config) == first);
  CHECK(cold_backend->calls == 0);
}

TEST_CASE("http embedding backend round-trips the wire format") {
  TestServer ts;
  std::string seen_instruction;
  ts.server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    seen_instruction = body.at("instruction").get<std::string>();
    nlohmann::json out;
    out["vectors"] = nlohmann::json::array();
    for (const auto& text : body.at("texts"))
      out["vectors"].push_back({static_cast<double>(text.get<std::string>().size()), 1.0});
    res.set_content(out.dump(), "application/json");
  });
  ts.start();

  esgkg::HttpEmbeddingBackend backend(ts.url());
  auto vecs = backend.embed_batch("find topics", {"ab", "cdef"});
  CHECK(seen_instruction == "find topics");
  REQUIRE(vecs.size() == 2);
  CHECK(vecs[0] == std::vector<double>{2.0, 1.0});
  CHECK(vecs[1] == std::vector<double>{4.0, 1.0});

  // Through the client the service vectors come back unit length: the raw
  // {3, 1} for "abc" turns into {3, 1} / sqrt(10).
  esgkg::EmbeddingClient client(std::make_shared<esgkg::HttpEmbeddingBackend>(ts.url()));
  auto normalized = client.embed("i", {"abc"});
  CHECK(normalized[0].values[0] == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-12));
  CHECK(normalized[0].values[1] == doctest::Approx(1.0 / std::sqrt(10.0)).epsilon(1e-12));
}

TEST_CASE("http backends retry transient failures then give up") {
  TestServer ts;
  std::atomic<int> embed_hits{0};
  std::atomic<int> generate_hits{0};
  ts.server.Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
    ++embed_hits;
    res.status = 500;
  });
  ts.server.Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
    ++generate_hits;
    res.status = 404;
  });
  ts.start();

  esgkg::RetryPolicy retry{3, std::chrono::milliseconds(1)};
  esgkg::HttpEmbeddingBackend embed(ts.url(), retry);
  CHECK_THROWS_AS(embed.embed_batch("i", {"x"}), esgkg::ServiceUnavailable);
  CHECK(embed_hits == 3);

  // Client errors other than 413 are not worth retrying.
  esgkg::HttpGenerationBackend gen(ts.url(), retry);
  CHECK_THROWS_AS(gen.generate("p", {}), esgkg::ServiceUnavailable);
  CHECK(generate_hits == 1);

  // Nothing listening at all: every attempt fails to connect.
  esgkg::HttpEmbeddingBackend refused("http://127.0.0.1:2", retry);
  CHECK_THROWS_AS(refused.embed_batch("i", {"x"}), esgkg::ServiceUnavailable);
}

TEST_CASE("http generation backend speaks the wire format and maps 413") {
  TestServer ts;
  nlohmann::json seen;
  ts.server.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    if (seen.at("prompt").get<std::string>() == "too long") {
      res.status = 413;
      return;
    }
    res.set_content("{\"text\": \"short answer\"}", "application/json");
  });
  ts.start();

  esgkg::HttpGenerationBackend backend(ts.url());
  esgkg::GenerationConfig config;
  CHECK(backend.generate("hello", config) == "short answer");
  CHECK(seen.at("temperature").get<double>() == 0.0);
  CHECK(seen.at("num_beams").get<int>() == 6);
  CHECK(seen.at("max_tokens").get<int>() == 512);

  CHECK_THROWS_AS(backend.generate("too long", config), esgkg::ResponseTooLong);
}

TEST_CASE("environment variables choose between stub and http backends") {
  const char* old_embed = std::getenv("EMBED_URL");
  const char* old_llm = std::getenv("LLM_URL");
  const std::string saved_embed = old_embed ? old_embed : "";
  const std::string saved_llm = old_llm ? old_llm : "";

  unsetenv("EMBED_URL");
  unsetenv("LLM_URL");
  CHECK(std::dynamic_pointer_cast<esgkg::StubEmbeddingBackend>(
            esgkg::embedding_backend_from_env()) != nullptr);
  CHECK(std::dynamic_pointer_cast<esgkg::ScriptedGenerationBackend>(
            esgkg::generation_backend_from_env()) != nullptr);

  setenv("EMBED_URL", "http://127.0.0.1:1", 1);
  setenv("LLM_URL", "http://127.0.0.1:1", 1);
  CHECK(std::dynamic_pointer_cast<esgkg::HttpEmbeddingBackend>(
            esgkg::embedding_backend_from_env()) != nullptr);
  CHECK(std::dynamic_pointer_cast<esgkg::HttpGenerationBackend>(
            esgkg::generation_backend_from_env()) != nullptr);

  if (old_embed)
    setenv("EMBED_URL", saved_embed.c_str(), 1);
  else
    unsetenv("EMBED_URL");
  if (old_llm)
    setenv("LLM_URL", saved_llm.c_str(), 1);
  else
    unsetenv("LLM_URL");
}
