#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace esgkg {

enum class Media { pdf, plain_text };

Media parse_media(const std::string& name);  // throws UnsupportedMedia
std::string media_name(Media media);

struct RawDocument {
  std::string company_id;
  int fiscal_year = 0;
  std::filesystem::path source_path;
  Media media = Media::plain_text;
};

struct CleanText {
  std::string company_id;
  std::string text;
};

struct Sentence {
  std::string company_id;
  int doc_index = 0;          // position within the company's sentence stream
  std::string text;
  std::size_t start_char = 0; // byte offsets into the CleanText this came from
  std::size_t end_char = 0;
};

// Whitespace cleanup applied to every extracted document, in order:
//  1. a line break whose next non-space character is lowercase or a digit
//     is a wrapped line and becomes one space
//  2. a line break preceded by a character outside .!?:; and followed by an
//     uppercase letter marks an unterminated heading or bullet, so ". " is
//     inserted where the break was
//  3. space runs collapse to one space, blank-line runs to one line break,
//     and the ends are trimmed
std::string normalize_text(std::string_view raw);

struct SegmentationConfig {
  // Case-sensitive tokens whose trailing period never ends a sentence.
  std::vector<std::string> abbreviations = {
      "e.g.", "i.e.", "U.S.", "Inc.", "Ltd.", "Mr.", "Dr.", "No.", "Fig."};
};

// Splits after . ! ? when followed by whitespace and then an uppercase
// letter, digit or opening quote. Never splits inside decimals or after a
// configured abbreviation. Trailing unterminated text becomes the final
// sentence. Spans tile the non-whitespace content of the input exactly.
std::vector<Sentence> segment_sentences(const CleanText& text,
                                        const SegmentationConfig& config = {});

// Drops fragments below min_tokens whitespace-separated tokens. Short
// fragments are almost always page furniture or infographic labels.
std::vector<Sentence> drop_short_sentences(std::vector<Sentence> sentences,
                                           std::size_t min_tokens = 3);

// Pluggable text extraction for binary report formats.
class PdfTextExtractor {
 public:
  virtual ~PdfTextExtractor() = default;
  virtual std::string extract(const std::filesystem::path& path) const = 0;
};

// Best-effort extractor for simple PDFs: inflates FlateDecode content
// streams and scrapes the Tj/TJ show-text operators. Scanned or exotically
// encoded files yield little or nothing, which is acceptable here because
// real deployments plug in a proper backend through the interface above.
class NaivePdfTextExtractor final : public PdfTextExtractor {
 public:
  std::string extract(const std::filesystem::path& path) const override;
};

// Reads the document and normalizes it. plain_text is read directly; pdf is
// delegated to `pdf` and fails with UnsupportedMedia when none is supplied.
CleanText extract_text(const RawDocument& doc,
                       const PdfTextExtractor* pdf = nullptr);

// Corpus manifest CSV with header company_id,fiscal_year,media,source_path.
// Relative source paths are resolved against the manifest's directory.
std::vector<RawDocument> load_manifest(const std::filesystem::path& csv_path);

}  // namespace esgkg
