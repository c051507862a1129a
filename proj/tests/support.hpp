#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "esgkg/clients.hpp"
#include "esgkg/graph.hpp"
#include "esgkg/rng.hpp"

namespace testsupport {

inline std::filesystem::path tests_dir() { return ESGKG_TESTS_DIR; }
inline std::filesystem::path data_dir() { return ESGKG_DATA_DIR; }

// Fresh directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("esgkg_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Random bipartite graph with 1..6 nodes per side, edge probability ~0.4.
inline esgkg::BipartiteGraph random_bipartite(std::uint64_t seed) {
  esgkg::SplitMix64 rng(seed);
  const std::size_t n = 1 + rng.next_below(6);
  const std::size_t m = 1 + rng.next_below(6);
  esgkg::BipartiteGraph g;
  for (std::size_t i = 0; i < n; ++i) g.left.push_back("A" + std::to_string(i));
  for (std::size_t j = 0; j < m; ++j) g.right.push_back("B" + std::to_string(j));
  g.incidence.assign(n * m, 0);
  for (std::size_t i = 0; i < n * m; ++i)
    g.incidence[i] = rng.next_double() < 0.4 ? 1 : 0;
  return g;
}

// Client over the deterministic offline embedder, no disk cache.
inline esgkg::EmbeddingClient stub_embedder(std::size_t dim = 256) {
  return esgkg::EmbeddingClient(std::make_shared<esgkg::StubEmbeddingBackend>(dim));
}

}  // namespace testsupport
