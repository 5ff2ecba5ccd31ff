#include "samkit/convert.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

// Implemented in docx.cpp / pdf_text.cpp.
std::string docx_to_text(std::string_view bytes);
std::string pdf_to_text(std::string_view bytes);

std::optional<SourceFormat> parse_format_tag(std::string_view tag) {
  if (tag == "pdf") return SourceFormat::pdf;
  if (tag == "txt") return SourceFormat::txt;
  if (tag == "sql") return SourceFormat::sql;
  if (tag == "py") return SourceFormat::py;
  if (tag == "docx") return SourceFormat::docx;
  if (tag == "ipynb") return SourceFormat::ipynb;
  if (tag == "rmd") return SourceFormat::rmd;
  return std::nullopt;
}

std::optional<SourceFormat> format_from_extension(std::string_view ext) {
  std::string lowered;
  for (char c : ext) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (!lowered.empty() && lowered.front() == '.') lowered.erase(lowered.begin());
  return parse_format_tag(lowered);
}

std::string_view format_tag_name(SourceFormat format) {
  switch (format) {
    case SourceFormat::pdf: return "pdf";
    case SourceFormat::txt: return "txt";
    case SourceFormat::sql: return "sql";
    case SourceFormat::py: return "py";
    case SourceFormat::docx: return "docx";
    case SourceFormat::ipynb: return "ipynb";
    case SourceFormat::rmd: return "rmd";
  }
  return "unknown";
}

namespace {

std::string normalize_newlines(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (bytes[i] == '\r') {
      if (i + 1 >= bytes.size() || bytes[i + 1] != '\n') out.push_back('\n');
      continue;
    }
    out.push_back(bytes[i]);
  }
  return out;
}

std::vector<std::string> split_table_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view body = line;
  std::size_t b = 0;
  std::size_t e = body.size();
  while (b < e && std::isspace(static_cast<unsigned char>(body[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(body[e - 1]))) --e;
  body = body.substr(b, e - b);
  if (!body.empty() && body.front() == '|') body.remove_prefix(1);
  if (!body.empty() && body.back() == '|') body.remove_suffix(1);
  std::string current;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '\\' && i + 1 < body.size() && body[i + 1] == '|') {
      current.push_back('|');
      ++i;
    } else if (body[i] == '|') {
      cells.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(body[i]);
    }
  }
  cells.push_back(trim(current));
  return cells;
}

bool is_table_separator(const std::string& line) {
  bool saw_dash = false;
  bool saw_pipe = false;
  for (char c : line) {
    if (c == '-') saw_dash = true;
    else if (c == '|') saw_pipe = true;
    else if (c == ':' || c == ' ' || c == '\t') continue;
    else return false;
  }
  return saw_dash && saw_pipe;
}

bool looks_like_table_row(const std::string& line) {
  return line.find('|') != std::string::npos && !trim(line).empty();
}

void emit_table(const std::vector<std::string>& headers,
                const std::vector<std::vector<std::string>>& rows, std::string& out) {
  bool first_row = true;
  for (const auto& row : rows) {
    if (!first_row) out.push_back('\n');
    first_row = false;
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::string header = i < headers.size() ? headers[i] : "Column " + std::to_string(i + 1);
      out += header;
      out += ": ";
      out += row[i];
      out.push_back('\n');
    }
  }
}

}  // namespace

std::string linearize_markdown_tables(std::string_view text) {
  auto lines = split_lines(text);
  std::string out;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (i + 1 < lines.size() && looks_like_table_row(lines[i]) && is_table_separator(lines[i + 1])) {
      auto headers = split_table_row(lines[i]);
      std::vector<std::vector<std::string>> rows;
      std::size_t j = i + 2;
      while (j < lines.size() && looks_like_table_row(lines[j]) && !is_table_separator(lines[j])) {
        rows.push_back(split_table_row(lines[j]));
        ++j;
      }
      emit_table(headers, rows, out);
      i = j;
    } else {
      out += lines[i];
      out.push_back('\n');
      ++i;
    }
  }
  return out;
}

namespace {

std::string ipynb_to_text(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptSource(std::string("invalid notebook json: ") + e.what());
  }
  if (!doc.contains("cells") || !doc["cells"].is_array()) {
    throw CorruptSource("notebook has no cells array");
  }
  std::string out;
  for (const auto& cell : doc["cells"]) {
    std::string source;
    if (cell.contains("source")) {
      const auto& src = cell["source"];
      if (src.is_string()) {
        source = src.get<std::string>();
      } else if (src.is_array()) {
        for (const auto& part : src) {
          if (part.is_string()) source += part.get<std::string>();
        }
      }
    }
    std::string cell_type = cell.value("cell_type", "");
    std::string text = normalize_newlines(source);
    if (cell_type == "markdown" || cell_type == "raw") {
      text = linearize_markdown_tables(text);
    }
    // Code cell sources stay verbatim; outputs are dropped (they may hold
    // base64 blobs).
    if (!text.empty()) {
      out += text;
      if (out.back() != '\n') out.push_back('\n');
      out.push_back('\n');
    }
  }
  while (!out.empty() && out.back() == '\n') out.pop_back();
  if (!out.empty()) out.push_back('\n');
  return out;
}

}  // namespace

std::string to_plain_text(std::string_view bytes, SourceFormat format) {
  switch (format) {
    case SourceFormat::txt:
    case SourceFormat::sql:
    case SourceFormat::py:
      return normalize_newlines(bytes);
    case SourceFormat::rmd:
      return linearize_markdown_tables(normalize_newlines(bytes));
    case SourceFormat::ipynb:
      return ipynb_to_text(bytes);
    case SourceFormat::docx:
      return docx_to_text(bytes);
    case SourceFormat::pdf:
      return pdf_to_text(bytes);
  }
  throw UnsupportedFormat("unknown format tag");
}

}  // namespace samkit
