#include "esgkg/corpus.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdlib>
#include <optional>

#include "esgkg/errors.hpp"
#include "esgkg/io.hpp"

namespace esgkg {

Media parse_media(const std::string& name) {
  if (name == "pdf") return Media::pdf;
  if (name == "plain_text") return Media::plain_text;
  throw UnsupportedMedia(name);
}

std::string media_name(Media media) {
  return media == Media::pdf ? "pdf" : "plain_text";
}

namespace {

bool is_terminal_punct(char c) {
  return c == '.' || c == '!' || c == '?' || c == ':' || c == ';';
}

// The three opening quote marks we care about beyond ASCII, as UTF-8.
bool is_opening_quote_at(std::string_view s, std::size_t i) {
  const char c = s[i];
  if (c == '"' || c == '\'' || c == '(') return true;
  if (i + 2 < s.size()) {
    const unsigned char a = s[i];
    const unsigned char b = s[i + 1];
    const unsigned char d = s[i + 2];
    if (a == 0xe2 && b == 0x80 && (d == 0x9c || d == 0x98)) return true;  // “ ‘
  }
  if (i + 1 < s.size()) {
    const unsigned char a = s[i];
    const unsigned char b = s[i + 1];
    if (a == 0xc2 && b == 0xab) return true;  // «
  }
  return false;
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  // Unify line endings and tabs first so the rules below only ever see
  // ' ' and '\n'.
  std::string s;
  s.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c == '\r') {
      if (i + 1 < raw.size() && raw[i + 1] == '\n') continue;
      c = '\n';
    }
    if (c == '\t' || c == '\f' || c == '\v') c = ' ';
    s.push_back(c);
  }

  // Rule 1: join wrapped lines. A newline counts as a wrap when the next
  // non-space character continues in lowercase or digits.
  std::string joined;
  joined.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\n') {
      joined.push_back(s[i]);
      continue;
    }
    std::size_t j = i + 1;
    while (j < s.size() && s[j] == ' ') ++j;
    if (j < s.size() && (ascii_lower(s[j]) || ascii_digit(s[j]))) {
      while (!joined.empty() && joined.back() == ' ') joined.pop_back();
      joined.push_back(' ');
      i = j - 1;
    } else {
      joined.push_back('\n');
    }
  }

  // Rule 2: terminate headings. A line ending without terminal punctuation
  // followed by an uppercase start gets a full stop. The break itself
  // survives only across a blank line; a single newline reads as a heading
  // boundary and is joined.
  std::string stopped;
  stopped.reserve(joined.size());
  for (std::size_t i = 0; i < joined.size(); ++i) {
    if (joined[i] != '\n') {
      stopped.push_back(joined[i]);
      continue;
    }
    std::size_t j = i;
    int newlines = 0;
    while (j < joined.size() && (joined[j] == '\n' || joined[j] == ' ')) {
      newlines += joined[j] == '\n';
      ++j;
    }
    std::size_t back = stopped.size();
    while (back > 0 && stopped[back - 1] == ' ') --back;
    if (back > 0 && !is_terminal_punct(stopped[back - 1]) && j < joined.size() &&
        ascii_upper(joined[j])) {
      stopped.resize(back);
      stopped += newlines > 1 ? ".\n" : ". ";
    } else {
      stopped.push_back('\n');
    }
    i = j - 1;
  }

  // Rule 3: collapse runs. Any whitespace run containing a newline becomes
  // one newline, any other run one space, and the ends are trimmed.
  std::string out;
  out.reserve(stopped.size());
  std::size_t i = 0;
  while (i < stopped.size()) {
    const char c = stopped[i];
    if (c != ' ' && c != '\n') {
      out.push_back(c);
      ++i;
      continue;
    }
    bool saw_newline = false;
    while (i < stopped.size() && (stopped[i] == ' ' || stopped[i] == '\n')) {
      saw_newline |= stopped[i] == '\n';
      ++i;
    }
    if (out.empty() || i >= stopped.size()) continue;  // trim ends
    out.push_back(saw_newline ? '\n' : ' ');
  }
  return out;
}

namespace {

// True when the period at `pos` closes one of the configured abbreviations.
bool ends_abbreviation(std::string_view text, std::size_t pos,
                       const std::vector<std::string>& abbreviations) {
  for (const std::string& abbr : abbreviations) {
    if (abbr.empty() || abbr.back() != '.') continue;
    const std::size_t len = abbr.size();
    if (pos + 1 < len) continue;
    const std::size_t start = pos + 1 - len;
    if (text.substr(start, len) != abbr) continue;
    if (start == 0 || !ascii_alnum(text[start - 1])) return true;
  }
  return false;
}

bool is_space_char(char c) { return c == ' ' || c == '\n'; }

}  // namespace

std::vector<Sentence> segment_sentences(const CleanText& text,
                                        const SegmentationConfig& config) {
  const std::string& s = text.text;
  std::vector<std::size_t> breaks;  // index one past each sentence terminator

  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 >= s.size() || !is_space_char(s[i + 1])) continue;
    std::size_t j = i + 1;
    while (j < s.size() && is_space_char(s[j])) ++j;
    if (j >= s.size()) continue;
    if (!(ascii_upper(s[j]) || ascii_digit(s[j]) || is_opening_quote_at(s, j)))
      continue;
    if (c == '.' && ends_abbreviation(s, i, config.abbreviations)) continue;
    breaks.push_back(i + 1);
  }
  breaks.push_back(s.size());

  std::vector<Sentence> out;
  std::size_t begin = 0;
  int doc_index = 0;
  for (std::size_t brk : breaks) {
    std::size_t from = begin;
    std::size_t to = brk;
    begin = brk;
    while (from < to && is_space_char(s[from])) ++from;
    while (to > from && is_space_char(s[to - 1])) --to;
    if (from == to) continue;
    Sentence sent;
    sent.company_id = text.company_id;
    sent.doc_index = doc_index++;
    sent.text = s.substr(from, to - from);
    sent.start_char = from;
    sent.end_char = to;
    out.push_back(std::move(sent));
  }
  return out;
}

std::vector<Sentence> drop_short_sentences(std::vector<Sentence> sentences,
                                           std::size_t min_tokens) {
  std::vector<Sentence> kept;
  kept.reserve(sentences.size());
  for (auto& sent : sentences) {
    if (split_ws(sent.text).size() >= min_tokens) kept.push_back(std::move(sent));
  }
  return kept;
}

CleanText extract_text(const RawDocument& doc, const PdfTextExtractor* pdf) {
  std::string raw;
  switch (doc.media) {
    case Media::plain_text:
      raw = read_file(doc.source_path);
      break;
    case Media::pdf:
      if (!pdf) throw UnsupportedMedia("pdf (no extractor backend registered)");
      raw = pdf->extract(doc.source_path);
      break;
  }
  return CleanText{doc.company_id, normalize_text(raw)};
}

std::vector<RawDocument> load_manifest(const std::filesystem::path& csv_path) {
  const auto rows = parse_csv(read_file(csv_path));
  if (rows.empty()) throw ConfigInvalid("empty manifest: " + csv_path.string());
  const std::vector<std::string> expected = {"company_id", "fiscal_year",
                                             "media", "source_path"};
  if (rows[0] != expected)
    throw ConfigInvalid("manifest header must be company_id,fiscal_year,media,source_path");

  std::vector<RawDocument> docs;
  const auto base = csv_path.parent_path();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 4)
      throw ConfigInvalid("manifest row " + std::to_string(r) + " has " +
                          std::to_string(row.size()) + " fields");
    RawDocument doc;
    doc.company_id = row[0];
    if (doc.company_id.empty())
      throw ConfigInvalid("manifest row " + std::to_string(r) + ": empty company_id");
    char* end = nullptr;
    doc.fiscal_year = static_cast<int>(std::strtol(row[1].c_str(), &end, 10));
    if (end == row[1].c_str() || *end != '\0' || doc.fiscal_year < 1990 ||
        doc.fiscal_year > 2100)
      throw ConfigInvalid("manifest row " + std::to_string(r) +
                          ": fiscal_year out of range: " + row[1]);
    doc.media = parse_media(row[2]);
    std::filesystem::path src(row[3]);
    doc.source_path = src.is_absolute() ? src : base / src;
    docs.push_back(std::move(doc));
  }
  return docs;
}

// ---------------------------------------------------------------------------
// Naive PDF extraction

namespace {

std::optional<std::string> inflate_stream(std::string_view data) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) return std::nullopt;
  std::string out;
  char buf[16384];
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  int rc = Z_OK;
  while (rc == Z_OK) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      return std::nullopt;
    }
    out.append(buf, sizeof(buf) - zs.avail_out);
    if (rc == Z_STREAM_END) break;
    if (zs.avail_in == 0 && zs.avail_out == sizeof(buf)) break;  // stalled
  }
  inflateEnd(&zs);
  return out;
}

// Reads a PDF literal string starting at the '(' and appends the decoded
// characters. Returns the index one past the closing ')'.
std::size_t read_literal_string(std::string_view s, std::size_t i, std::string& out) {
  int depth = 1;
  ++i;
  while (i < s.size() && depth > 0) {
    char c = s[i];
    if (c == '\\' && i + 1 < s.size()) {
      char esc = s[i + 1];
      i += 2;
      switch (esc) {
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        case 't': out += '\t'; break;
        case 'b': case 'f': break;
        case '(': out += '('; break;
        case ')': out += ')'; break;
        case '\\': out += '\\'; break;
        case '\n': break;  // line continuation
        default:
          if (esc >= '0' && esc <= '7') {
            int code = esc - '0';
            for (int k = 0; k < 2 && i < s.size() && s[i] >= '0' && s[i] <= '7'; ++k)
              code = code * 8 + (s[i++] - '0');
            out += static_cast<char>(code & 0xff);
          } else {
            out += esc;
          }
          break;
      }
      continue;
    }
    if (c == '(') ++depth;
    if (c == ')') {
      --depth;
      if (depth == 0) { ++i; break; }
    }
    if (depth > 0) out += c;
    ++i;
  }
  return i;
}

// Pulls show-text operator arguments out of one decoded content stream.
std::string scrape_text_operators(std::string_view s) {
  std::string out;
  bool in_text_object = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!in_text_object) {
      if (s[i] == 'B' && i + 1 < s.size() && s[i + 1] == 'T' &&
          (i == 0 || !ascii_alnum(s[i - 1])) &&
          (i + 2 >= s.size() || !ascii_alnum(s[i + 2]))) {
        in_text_object = true;
        ++i;
      }
      continue;
    }
    const char c = s[i];
    if (c == 'E' && i + 1 < s.size() && s[i + 1] == 'T' &&
        (i + 2 >= s.size() || !ascii_alnum(s[i + 2]))) {
      in_text_object = false;
      out += '\n';
      ++i;
      continue;
    }
    if (c == '(') {
      std::string chunk;
      i = read_literal_string(s, i, chunk) - 1;
      out += chunk;
      continue;
    }
    // Td, TD and T* start new lines in the page layout.
    if (c == 'T' && i + 1 < s.size() &&
        (s[i + 1] == 'd' || s[i + 1] == 'D' || s[i + 1] == '*')) {
      out += '\n';
      ++i;
    }
  }
  return out;
}

}  // namespace

std::string NaivePdfTextExtractor::extract(const std::filesystem::path& path) const {
  const std::string data = read_file(path);
  if (data.rfind("%PDF", 0) != 0)
    throw UnreadableFile("not a PDF file: " + path.string());

  std::string text;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dict_end = data.find("stream", pos);
    if (dict_end == std::string::npos) break;
    std::size_t body = dict_end + 6;
    if (body < data.size() && data[body] == '\r') ++body;
    if (body < data.size() && data[body] == '\n') ++body;
    const std::size_t stream_end = data.find("endstream", body);
    if (stream_end == std::string::npos) break;
    std::string_view body_view(data.data() + body, stream_end - body);

    // Look back a little for the stream dictionary's filter entry.
    const std::size_t dict_start = dict_end > 512 ? dict_end - 512 : 0;
    std::string_view dict(data.data() + dict_start, dict_end - dict_start);
    std::string decoded;
    if (dict.find("FlateDecode") != std::string_view::npos) {
      auto inflated = inflate_stream(body_view);
      if (inflated) decoded = *inflated;
    } else {
      decoded = std::string(body_view);
    }
    text += scrape_text_operators(decoded);
    pos = stream_end + 9;
  }
  return text;
}

}  // namespace esgkg
