#include "esgkg/search.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "esgkg/errors.hpp"
#include "esgkg/io.hpp"

namespace esgkg {

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size())
    throw DimensionMismatch(std::to_string(a.values.size()) + " vs " +
                            std::to_string(b.values.size()));
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine of a zero vector is undefined");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return dot / (na * nb);
}

CorpusIndex CorpusIndex::build(std::vector<Sentence> sentences, EmbeddingClient& client) {
  if (sentences.empty()) throw EmptyCorpus("no sentences to index");
  std::vector<std::string> texts;
  texts.reserve(sentences.size());
  for (const auto& s : sentences) texts.push_back(s.text);
  CorpusIndex index;
  index.vectors_ = client.embed(kCorpusInstruction, texts);
  index.sentences_ = std::move(sentences);
  return index;
}

std::vector<CategoryQuery> embed_queries(const std::vector<std::string>& categories,
                                         EmbeddingClient& client) {
  auto vectors = client.embed(kQueryInstruction, categories);
  std::vector<CategoryQuery> out;
  out.reserve(categories.size());
  for (std::size_t i = 0; i < categories.size(); ++i)
    out.push_back({categories[i], std::move(vectors[i])});
  return out;
}

std::vector<std::string> load_categories(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  std::vector<std::string> out;
  std::string line;
  for (std::size_t i = 0; i <= content.size(); ++i) {
    if (i < content.size() && content[i] != '\n') {
      line += content[i];
      continue;
    }
    std::string name = trim(line);
    if (!name.empty()) out.push_back(std::move(name));
    line.clear();
  }
  if (out.empty()) throw ConfigInvalid("category file is empty: " + path.string());
  return out;
}

std::vector<SentenceMatch> retrieve(const CorpusIndex& index,
                                    const CategoryQuery& query,
                                    const SearchConfig& config) {
  std::vector<SentenceMatch> matches;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const double score = cosine_similarity(query.embedding, index.vector(i));
    if (score >= config.t_sim)
      matches.push_back({index.sentence(i), query.name, score});
  }
  std::sort(matches.begin(), matches.end(),
            [](const SentenceMatch& a, const SentenceMatch& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.sentence.company_id != b.sentence.company_id)
                return a.sentence.company_id < b.sentence.company_id;
              return a.sentence.doc_index < b.sentence.doc_index;
            });
  if (config.k >= 0 && matches.size() > static_cast<std::size_t>(config.k))
    matches.resize(static_cast<std::size_t>(config.k));
  return matches;
}

std::vector<SelectedSentence> select_esg_sentences(
    const CorpusIndex& index, const std::vector<CategoryQuery>& queries,
    const SearchConfig& config) {
  struct Agg {
    Sentence sentence;
    std::set<std::string> categories;
    double max_score = 0.0;
  };
  std::map<std::pair<std::string, int>, Agg> by_sentence;

  for (const auto& query : queries) {
    for (const auto& match : retrieve(index, query, config)) {
      auto key = std::make_pair(match.sentence.company_id, match.sentence.doc_index);
      auto [it, inserted] = by_sentence.try_emplace(key);
      if (inserted) it->second.sentence = match.sentence;
      it->second.categories.insert(match.category);
      it->second.max_score = std::max(it->second.max_score, match.score);
    }
  }

  std::vector<SelectedSentence> out;
  out.reserve(by_sentence.size());
  for (auto& [key, agg] : by_sentence) {
    SelectedSentence sel;
    sel.sentence = std::move(agg.sentence);
    sel.matched_categories.assign(agg.categories.begin(), agg.categories.end());
    sel.max_score = agg.max_score;
    out.push_back(std::move(sel));
  }
  return out;  // map iteration already orders by (company_id, doc_index)
}

}  // namespace esgkg
