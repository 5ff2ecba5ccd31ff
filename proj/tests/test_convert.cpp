#include "doctest.h"
#include "samkit/convert.hpp"
#include "samkit/errors.hpp"

using namespace samkit;

TEST_CASE("format tags parse both ways") {
  CHECK(parse_format_tag("pdf") == SourceFormat::pdf);
  CHECK(parse_format_tag("ipynb") == SourceFormat::ipynb);
  CHECK(format_tag_name(SourceFormat::docx) == "docx");
  CHECK_FALSE(parse_format_tag("odt").has_value());
  CHECK(format_from_extension(".Rmd") == SourceFormat::rmd);
  CHECK(format_from_extension(".PY") == SourceFormat::py);
  CHECK_FALSE(format_from_extension(".zip").has_value());
}

TEST_CASE("plain text formats pass through with newline normalization") {
  CHECK(to_plain_text("a\r\nb\rc\n", SourceFormat::txt) == "a\nb\nc\n");
  CHECK(to_plain_text("SELECT 1;\r\n", SourceFormat::sql) == "SELECT 1;\n");
  CHECK(to_plain_text("def f():\n    return 1\n", SourceFormat::py) ==
        "def f():\n    return 1\n");
}

TEST_CASE("markdown pipe tables linearize to header-cell lines") {
  std::string md =
      "Intro line.\n"
      "\n"
      "| Name | Mark |\n"
      "|------|------|\n"
      "| Ada  | 91   |\n"
      "| Bob  | 77   |\n"
      "\n"
      "Outro.\n";
  std::string out = to_plain_text(md, SourceFormat::rmd);
  CHECK(out.find("Name: Ada") != std::string::npos);
  CHECK(out.find("Mark: 91") != std::string::npos);
  CHECK(out.find("Name: Bob") != std::string::npos);
  CHECK(out.find("Mark: 77") != std::string::npos);
  CHECK(out.find("Intro line.") != std::string::npos);
  CHECK(out.find("Outro.") != std::string::npos);
  CHECK(out.find("|") == std::string::npos);
  // One row's cells come out before the next row's.
  CHECK(out.find("Mark: 91") < out.find("Name: Bob"));
}

TEST_CASE("markdown tables survive extra cells and missing headers") {
  std::string md =
      "| A | B |\n"
      "|---|---|\n"
      "| 1 | 2 | 3 |\n";
  std::string out = to_plain_text(md, SourceFormat::rmd);
  CHECK(out.find("A: 1") != std::string::npos);
  CHECK(out.find("B: 2") != std::string::npos);
  CHECK(out.find("Column 3: 3") != std::string::npos);
}

TEST_CASE("notebooks keep cell order, linearize markdown, drop outputs") {
  std::string nb = R"({
    "cells": [
      {"cell_type": "markdown", "source": ["# Title\n", "| H |\n", "|---|\n", "| v |\n"]},
      {"cell_type": "code", "source": ["x = 1\n", "print(x)\n"],
       "outputs": [{"output_type": "stream", "text": ["1\n"]}]},
      {"cell_type": "markdown", "source": "tail text"}
    ]
  })";
  std::string out = to_plain_text(nb, SourceFormat::ipynb);
  CHECK(out.find("# Title") != std::string::npos);
  CHECK(out.find("H: v") != std::string::npos);
  CHECK(out.find("x = 1") != std::string::npos);
  CHECK(out.find("print(x)") != std::string::npos);
  CHECK(out.find("tail text") != std::string::npos);
  // Stream output dropped; code precedes the trailing markdown cell.
  auto code_pos = out.find("print(x)");
  auto tail_pos = out.find("tail text");
  CHECK(code_pos < tail_pos);
  CHECK(out.substr(code_pos + 8, tail_pos - code_pos - 8).find("1\n1") == std::string::npos);
}

TEST_CASE("corrupt notebook raises CorruptSource") {
  CHECK_THROWS_AS((void)to_plain_text("not json", SourceFormat::ipynb), CorruptSource);
  CHECK_THROWS_AS((void)to_plain_text("{\"nbformat\": 4}", SourceFormat::ipynb), CorruptSource);
}
