#include <zlib.h>

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

namespace {

std::string zlib_inflate(std::string_view compressed) {
  z_stream strm{};
  if (inflateInit(&strm) != Z_OK) throw CorruptSource("zlib init failed");
  std::string out;
  out.resize(compressed.size() * 4 + 1024);
  strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  strm.avail_in = static_cast<uInt>(compressed.size());
  std::size_t written = 0;
  int ret = Z_OK;
  while (true) {
    if (written == out.size()) out.resize(out.size() * 2);
    strm.next_out = reinterpret_cast<Bytef*>(out.data() + written);
    strm.avail_out = static_cast<uInt>(out.size() - written);
    ret = inflate(&strm, Z_NO_FLUSH);
    written = out.size() - strm.avail_out;
    if (ret == Z_STREAM_END) break;
    if (ret != Z_OK || strm.avail_in == 0) break;
  }
  inflateEnd(&strm);
  out.resize(written);
  return out;
}

struct ContentParser {
  std::string_view data;
  std::size_t pos = 0;
  std::string out;
  std::vector<std::string> pending;

  bool done() const { return pos >= data.size(); }

  void flush_pending() {
    for (auto& s : pending) out += s;
    pending.clear();
  }

  void append_newline() {
    if (!out.empty() && out.back() != '\n') out.push_back('\n');
  }

  std::string parse_literal_string() {
    std::string s;
    int depth = 1;
    ++pos;  // consume '('
    while (pos < data.size() && depth > 0) {
      char c = data[pos];
      if (c == '\\' && pos + 1 < data.size()) {
        char esc = data[pos + 1];
        pos += 2;
        switch (esc) {
          case 'n': s.push_back('\n'); break;
          case 'r': s.push_back('\r'); break;
          case 't': s.push_back('\t'); break;
          case 'b': case 'f': break;
          case '(': s.push_back('('); break;
          case ')': s.push_back(')'); break;
          case '\\': s.push_back('\\'); break;
          default:
            if (esc >= '0' && esc <= '7') {
              int value = esc - '0';
              for (int k = 0; k < 2 && pos < data.size() && data[pos] >= '0' && data[pos] <= '7'; ++k) {
                value = value * 8 + (data[pos] - '0');
                ++pos;
              }
              s.push_back(static_cast<char>(value));
            }
            break;
        }
        continue;
      }
      if (c == '(') ++depth;
      if (c == ')') {
        --depth;
        if (depth == 0) {
          ++pos;
          break;
        }
      }
      s.push_back(c);
      ++pos;
    }
    return s;
  }

  std::string parse_hex_string() {
    std::string s;
    ++pos;  // consume '<'
    std::string hex;
    while (pos < data.size() && data[pos] != '>') {
      if (std::isxdigit(static_cast<unsigned char>(data[pos]))) hex.push_back(data[pos]);
      ++pos;
    }
    if (pos < data.size()) ++pos;
    if (hex.size() % 2) hex.push_back('0');
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
      auto nibble = [](char c) {
        return c <= '9' ? c - '0' : (c | 0x20) - 'a' + 10;
      };
      s.push_back(static_cast<char>(nibble(hex[i]) * 16 + nibble(hex[i + 1])));
    }
    return s;
  }

  void run() {
    std::string token;
    while (pos < data.size()) {
      char c = data[pos];
      if (c == '(') {
        pending.push_back(parse_literal_string());
        token.clear();
        continue;
      }
      if (c == '<' && pos + 1 < data.size() && data[pos + 1] != '<') {
        pending.push_back(parse_hex_string());
        token.clear();
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c)) || c == '[' || c == ']' || c == '<' ||
          c == '>' || c == '/') {
        handle_token(token);
        token.clear();
        ++pos;
        if (c == '/') {  // skip name token
          while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos])) &&
                 data[pos] != '/' && data[pos] != '(' && data[pos] != '<' && data[pos] != '[' &&
                 data[pos] != ']' && data[pos] != '>') {
            ++pos;
          }
        }
        continue;
      }
      token.push_back(c);
      ++pos;
    }
    handle_token(token);
  }

  void handle_token(const std::string& token) {
    if (token.empty()) return;
    if (token == "Tj" || token == "TJ") {
      flush_pending();
    } else if (token == "'") {
      append_newline();
      flush_pending();
    } else if (token == "\"") {
      append_newline();
      // Operands are: word spacing, char spacing, string.
      if (!pending.empty()) {
        out += pending.back();
        pending.clear();
      }
    } else if (token == "Td" || token == "TD" || token == "T*" || token == "ET") {
      pending.clear();
      append_newline();
    } else if (token == "BT") {
      pending.clear();
    } else if (!std::isdigit(static_cast<unsigned char>(token[0])) && token[0] != '-' &&
               token[0] != '.') {
      // Any other operator consumes pending operands.
      pending.clear();
    }
  }
};

// Drop bytes we cannot map to text. Without font cmaps, non-ASCII codes from
// embedded fonts would otherwise leak through as binary residue.
std::string sanitize(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (unsigned char c : raw) {
    if (c == '\n' || c == '\t' || (c >= 0x20 && c < 0x7f)) out.push_back(static_cast<char>(c));
    else if (c == '\r') out.push_back('\n');
    else out.push_back(' ');
  }
  return out;
}

bool has_text_content(std::string_view s) {
  for (unsigned char c : s) {
    if (std::isalnum(c)) return true;
  }
  return false;
}

}  // namespace

std::string pdf_to_text(std::string_view bytes) {
  if (bytes.size() < 5 || bytes.substr(0, 5) != "%PDF-") {
    throw CorruptSource("not a pdf file");
  }
  std::string out;
  std::size_t search = 0;
  while (true) {
    std::size_t stream_kw = bytes.find("stream", search);
    if (stream_kw == std::string_view::npos) break;
    std::size_t dict_start = bytes.rfind("<<", stream_kw);
    std::string_view dict =
        dict_start == std::string_view::npos ? std::string_view{}
                                             : bytes.substr(dict_start, stream_kw - dict_start);
    std::size_t data_start = stream_kw + 6;
    if (data_start < bytes.size() && bytes[data_start] == '\r') ++data_start;
    if (data_start < bytes.size() && bytes[data_start] == '\n') ++data_start;
    std::size_t data_end = bytes.find("endstream", data_start);
    if (data_end == std::string_view::npos) break;
    search = data_end + 9;

    std::string_view raw = bytes.substr(data_start, data_end - data_start);
    std::string decoded;
    if (dict.find("/FlateDecode") != std::string_view::npos) {
      try {
        decoded = zlib_inflate(raw);
      } catch (const CorruptSource&) {
        continue;  // not every stream must decode; best-effort
      }
    } else if (dict.find("/Filter") != std::string_view::npos) {
      continue;  // unsupported filter
    } else {
      decoded = std::string(raw);
    }
    if (decoded.find("BT") == std::string::npos) continue;
    ContentParser parser{decoded};
    parser.run();
    if (!parser.out.empty()) {
      out += sanitize(parser.out);
      if (out.back() != '\n') out.push_back('\n');
    }
  }
  if (!has_text_content(out)) {
    throw CorruptSource("no extractable text in pdf");
  }
  return out;
}

}  // namespace samkit
