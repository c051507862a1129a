#pragma once

#include <string>
#include <vector>

#include "esgkg/clients.hpp"
#include "esgkg/corpus.hpp"

namespace esgkg {

// Asymmetric instructions: category names are short titles, corpus entries
// are full statements, and the encoder is told which side it is embedding.
inline constexpr const char* kQueryInstruction =
    "Represent the title for retrieving relevant statements";
inline constexpr const char* kCorpusInstruction =
    "Represent the statement for retrieval";

struct SearchConfig {
  double t_sim = 0.6;  // minimum cosine score to count as a match
  int k = 30;          // matches kept per category
};

struct CategoryQuery {
  std::string name;
  EmbeddingVector embedding;
};

struct SentenceMatch {
  Sentence sentence;
  std::string category;
  double score = 0.0;
};

struct SelectedSentence {
  Sentence sentence;
  std::vector<std::string> matched_categories;  // sorted, unique
  double max_score = 0.0;
};

// Throws DimensionMismatch on length disagreement, ZeroVector on zero norm.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Sentence store with precomputed corpus-side embeddings. Retrieval is a
// brute-force scan: the corpus tops out at a few hundred thousand sentences
// and exactness matters more than ANN speedups at that size.
class CorpusIndex {
 public:
  static CorpusIndex build(std::vector<Sentence> sentences, EmbeddingClient& client);

  std::size_t size() const { return sentences_.size(); }
  const Sentence& sentence(std::size_t i) const { return sentences_[i]; }
  const EmbeddingVector& vector(std::size_t i) const { return vectors_[i]; }

 private:
  std::vector<Sentence> sentences_;
  std::vector<EmbeddingVector> vectors_;
};

std::vector<CategoryQuery> embed_queries(const std::vector<std::string>& categories,
                                         EmbeddingClient& client);

// Category file: one category name per line, blanks ignored.
std::vector<std::string> load_categories(const std::filesystem::path& path);

// All sentences scoring at least t_sim against the query, best first, ties
// broken by (company_id, doc_index), truncated to k.
std::vector<SentenceMatch> retrieve(const CorpusIndex& index,
                                    const CategoryQuery& query,
                                    const SearchConfig& config);

// Union of per-category retrievals. Each sentence appears once, annotated
// with every category that matched it and its best score, ordered by
// (company_id, doc_index).
std::vector<SelectedSentence> select_esg_sentences(
    const CorpusIndex& index, const std::vector<CategoryQuery>& queries,
    const SearchConfig& config);

}  // namespace esgkg
