#include <zlib.h>

#include <string>

#include "doctest.h"
#include "esgkg/corpus.hpp"
#include "esgkg/errors.hpp"
#include "esgkg/io.hpp"
#include "support.hpp"

using namespace esgkg;

TEST_CASE("normalize_text joins wrapped lines") {
  CHECK(normalize_text("The company reduced\nemissions this year.") ==
        "The company reduced emissions this year.");
  CHECK(normalize_text("Output rose by\n12 percent.") == "Output rose by 12 percent.");
  // Indented continuations lose their leading spaces too.
  CHECK(normalize_text("cut\n   water use") == "cut water use");
}

TEST_CASE("normalize_text terminates headings before uppercase starts") {
  CHECK(normalize_text("Environmental Review\nThe board met twice.") ==
        "Environmental Review. The board met twice.");
  // A line already closed by terminal punctuation keeps its break.
  CHECK(normalize_text("It worked.\nNext year will differ.") ==
        "It worked.\nNext year will differ.");
  CHECK(normalize_text("Agenda:\nFirst item.") == "Agenda:\nFirst item.");
}

TEST_CASE("normalize_text collapses runs and trims ends") {
  CHECK(normalize_text("  a   b\t c  ") == "a b c");
  CHECK(normalize_text("One.\n\n\n\nTwo.") == "One.\nTwo.");
  CHECK(normalize_text("\r\nWindows line.\r\nUnix line.\n") ==
        "Windows line.\nUnix line.");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text(" \n \n ") == "");
}

TEST_CASE("segment_sentences splits on terminators followed by a capital") {
  CleanText text{"ACME", "We cut waste. We saved water! Did it work? Yes."};
  auto sents = segment_sentences(text);
  REQUIRE(sents.size() == 4);
  CHECK(sents[0].text == "We cut waste.");
  CHECK(sents[1].text == "We saved water!");
  CHECK(sents[2].text == "Did it work?");
  CHECK(sents[3].text == "Yes.");
  for (int i = 0; i < 4; ++i) CHECK(sents[i].doc_index == i);
}

TEST_CASE("segment_sentences respects abbreviations and decimals") {
  CleanText text{"ACME", "Costs fell 3.5 percent, e.g. Brazil. Inc. holders agreed."};
  auto sents = segment_sentences(text);
  REQUIRE(sents.size() == 2);
  CHECK(sents[0].text == "Costs fell 3.5 percent, e.g. Brazil.");
  CHECK(sents[1].text == "Inc. holders agreed.");
}

TEST_CASE("segment_sentences does not split before lowercase continuations") {
  CleanText text{"ACME", "The ratio fell. yet remained high."};
  auto sents = segment_sentences(text);
  REQUIRE(sents.size() == 1);
  CHECK(sents[0].text == "The ratio fell. yet remained high.");
}

TEST_CASE("segment_sentences keeps unterminated trailing text") {
  CleanText text{"ACME", "First part done. And then some trailing words"};
  auto sents = segment_sentences(text);
  REQUIRE(sents.size() == 2);
  CHECK(sents[1].text == "And then some trailing words");
}

TEST_CASE("segment_sentences spans index the clean text exactly") {
  CleanText text{"ACME", "Alpha beta. Gamma delta? \"Epsilon\" went up."};
  auto sents = segment_sentences(text);
  REQUIRE(sents.size() == 3);
  for (const auto& s : sents) {
    CHECK(text.text.substr(s.start_char, s.end_char - s.start_char) == s.text);
    CHECK(s.company_id == "ACME");
  }
}

TEST_CASE("drop_short_sentences removes fragments") {
  CleanText text{"ACME", "Page 4. The group cut emissions sharply. Contents."};
  auto sents = drop_short_sentences(segment_sentences(text), 3);
  REQUIRE(sents.size() == 1);
  CHECK(sents[0].text == "The group cut emissions sharply.");
}

TEST_CASE("load_manifest resolves relative paths and validates fields") {
  testsupport::TempDir dir("manifest");
  write_file(dir.path() / "r.txt", "Some report text.\n");
  write_file(dir.path() / "m.csv",
             "company_id,fiscal_year,media,source_path\nACME,2022,plain_text,r.txt\n");
  auto docs = load_manifest(dir.path() / "m.csv");
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].company_id == "ACME");
  CHECK(docs[0].fiscal_year == 2022);
  CHECK(docs[0].media == Media::plain_text);
  CHECK(docs[0].source_path == dir.path() / "r.txt");

  write_file(dir.path() / "bad_header.csv", "company,year\nX,2020\n");
  CHECK_THROWS_AS(load_manifest(dir.path() / "bad_header.csv"), ConfigInvalid);

  write_file(dir.path() / "bad_year.csv",
             "company_id,fiscal_year,media,source_path\nACME,1024,plain_text,r.txt\n");
  CHECK_THROWS_AS(load_manifest(dir.path() / "bad_year.csv"), ConfigInvalid);

  write_file(dir.path() / "bad_media.csv",
             "company_id,fiscal_year,media,source_path\nACME,2022,docx,r.txt\n");
  CHECK_THROWS_AS(load_manifest(dir.path() / "bad_media.csv"), UnsupportedMedia);
}

TEST_CASE("extract_text reads plain text and requires a pdf backend for pdf") {
  testsupport::TempDir dir("extract");
  write_file(dir.path() / "doc.txt", "Heading\nThe plant reopened.\n");
  RawDocument doc{"ACME", 2021, dir.path() / "doc.txt", Media::plain_text};
  CleanText clean = extract_text(doc);
  CHECK(clean.company_id == "ACME");
  CHECK(clean.text == "Heading. The plant reopened.");

  RawDocument pdf_doc{"ACME", 2021, dir.path() / "doc.txt", Media::pdf};
  CHECK_THROWS_AS(extract_text(pdf_doc), UnsupportedMedia);
}

namespace {

std::string deflate_string(const std::string& raw) {
  uLongf bound = compressBound(raw.size());
  std::string out(bound, '\0');
  REQUIRE(compress(reinterpret_cast<Bytef*>(out.data()), &bound,
                   reinterpret_cast<const Bytef*>(raw.data()), raw.size()) == Z_OK);
  out.resize(bound);
  return out;
}

}  // namespace

TEST_CASE("naive pdf extractor scrapes show-text operators") {
  testsupport::TempDir dir("pdf");
  const std::string content =
      "BT (Solar panels were installed.) Tj 0 -14 Td (Output doubled.) Tj ET";

  SUBCASE("uncompressed stream") {
    std::string pdf = "%PDF-1.4\n<< /Length " + std::to_string(content.size()) +
                      " >>\nstream\n" + content + "\nendstream\n%%EOF\n";
    write_file(dir.path() / "plain.pdf", pdf);
    NaivePdfTextExtractor extractor;
    std::string text = extractor.extract(dir.path() / "plain.pdf");
    CHECK(text.find("Solar panels were installed.") != std::string::npos);
    CHECK(text.find("Output doubled.") != std::string::npos);
  }

  SUBCASE("flate-compressed stream") {
    const std::string packed = deflate_string(content);
    std::string pdf = "%PDF-1.4\n<< /Filter /FlateDecode /Length " +
                      std::to_string(packed.size()) + " >>\nstream\n" + packed +
                      "\nendstream\n%%EOF\n";
    write_file(dir.path() / "flate.pdf", pdf);
    NaivePdfTextExtractor extractor;
    std::string text = extractor.extract(dir.path() / "flate.pdf");
    CHECK(text.find("Solar panels were installed.") != std::string::npos);
  }

  SUBCASE("escaped parentheses and octal codes decode") {
    const std::string tricky = "BT (A \\(net\\) gain of \\045.) Tj ET";
    std::string pdf = "%PDF-1.4\n<< >>\nstream\n" + tricky + "\nendstream\n";
    write_file(dir.path() / "esc.pdf", pdf);
    NaivePdfTextExtractor extractor;
    std::string text = extractor.extract(dir.path() / "esc.pdf");
    CHECK(text.find("A (net) gain of %.") != std::string::npos);
  }

  SUBCASE("non-pdf bytes are rejected") {
    write_file(dir.path() / "fake.pdf", "plain text pretending");
    NaivePdfTextExtractor extractor;
    CHECK_THROWS_AS(extractor.extract(dir.path() / "fake.pdf"), UnreadableFile);
  }
}

TEST_CASE("csv round-trips quoted fields") {
  std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", "multi\nline"};
  const std::string line = csv_join(fields);
  auto rows = parse_csv(line + "\n");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == fields);
}
