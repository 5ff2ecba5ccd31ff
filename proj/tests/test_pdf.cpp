#include <zlib.h>

#include <string>

#include "doctest.h"
#include "samkit/convert.hpp"
#include "samkit/errors.hpp"

using namespace samkit;

namespace {

std::string zlib_deflate(const std::string& data) {
  uLongf bound = compressBound(data.size());
  std::string out(bound, '\0');
  REQUIRE(compress(reinterpret_cast<Bytef*>(out.data()), &bound,
                   reinterpret_cast<const Bytef*>(data.data()), data.size()) == Z_OK);
  out.resize(bound);
  return out;
}

std::string pdf_with_stream(const std::string& content, bool flate) {
  std::string body = flate ? zlib_deflate(content) : content;
  std::string pdf = "%PDF-1.4\n1 0 obj\n<< /Length " + std::to_string(body.size());
  if (flate) pdf += " /Filter /FlateDecode";
  pdf += " >>\nstream\n";
  pdf += body;
  pdf += "\nendstream\nendobj\ntrailer\n%%EOF\n";
  return pdf;
}

}  // namespace

TEST_CASE("plain and flate-compressed content streams extract text") {
  std::string content =
      "BT /F1 12 Tf 72 720 Td (Assessment brief) Tj T* (Write 2000 words) Tj ET";
  for (bool flate : {false, true}) {
    CAPTURE(flate);
    std::string text = to_plain_text(pdf_with_stream(content, flate), SourceFormat::pdf);
    CHECK(text.find("Assessment brief") != std::string::npos);
    CHECK(text.find("Write 2000 words") != std::string::npos);
    // Td starts a fresh line between the two strings.
    CHECK(text.find("Assessment brief\n") != std::string::npos);
  }
}

TEST_CASE("TJ arrays with kerning numbers join their strings") {
  std::string content = "BT [(Hel) -20 (lo) 15 ( world)] TJ ET";
  std::string text = to_plain_text(pdf_with_stream(content, true), SourceFormat::pdf);
  CHECK(text.find("Hello world") != std::string::npos);
}

TEST_CASE("escapes, hex strings and quote operators decode") {
  std::string content =
      "BT (Parens \\(nested\\) and backslash \\\\ here) Tj T* <4869207468657265> Tj "
      "(line one) ' ET";
  std::string text = to_plain_text(pdf_with_stream(content, false), SourceFormat::pdf);
  CHECK(text.find("Parens (nested) and backslash \\ here") != std::string::npos);
  CHECK(text.find("Hi there") != std::string::npos);
  CHECK(text.find("line one") != std::string::npos);
}

TEST_CASE("non-text and unsupported streams are skipped, text still found") {
  std::string image = "\x00\x01\x02\x03 binary-ish";
  std::string pdf = "%PDF-1.5\n";
  pdf += "2 0 obj\n<< /Length 14 /Filter /DCTDecode >>\nstream\n" + image +
         "\nendstream\nendobj\n";
  std::string content = "BT (Recovered line) Tj ET";
  std::string body = zlib_deflate(content);
  pdf += "3 0 obj\n<< /Length " + std::to_string(body.size()) +
         " /Filter /FlateDecode >>\nstream\n" + body + "\nendstream\nendobj\n%%EOF\n";
  std::string text = to_plain_text(pdf, SourceFormat::pdf);
  CHECK(text.find("Recovered line") != std::string::npos);
}

TEST_CASE("pdfs without recoverable text raise CorruptSource") {
  CHECK_THROWS_AS((void)to_plain_text("not a pdf at all", SourceFormat::pdf), CorruptSource);
  // Valid header, no text operators.
  CHECK_THROWS_AS((void)to_plain_text("%PDF-1.4\n%%EOF\n", SourceFormat::pdf), CorruptSource);
  // A stream whose flate data is garbage.
  std::string pdf =
      "%PDF-1.4\n1 0 obj\n<< /Length 8 /Filter /FlateDecode >>\nstream\nGARBAGE!\nendstream\n"
      "endobj\n%%EOF\n";
  CHECK_THROWS_AS((void)to_plain_text(pdf, SourceFormat::pdf), CorruptSource);
}

TEST_CASE("non-ascii bytes sanitize to spaces instead of leaking") {
  std::string content = "BT (caf\xe9 r\xe9sum\xe9 text) Tj ET";
  std::string text = to_plain_text(pdf_with_stream(content, true), SourceFormat::pdf);
  CHECK(text.find("caf  r sum  text") != std::string::npos);
}
