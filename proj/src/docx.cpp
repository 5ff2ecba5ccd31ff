#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

namespace {

std::uint32_t read_u32(std::string_view data, std::size_t pos) {
  return std::uint32_t(std::uint8_t(data[pos])) | std::uint32_t(std::uint8_t(data[pos + 1])) << 8 |
         std::uint32_t(std::uint8_t(data[pos + 2])) << 16 |
         std::uint32_t(std::uint8_t(data[pos + 3])) << 24;
}

std::uint16_t read_u16(std::string_view data, std::size_t pos) {
  return std::uint16_t(std::uint8_t(data[pos]) | std::uint8_t(data[pos + 1]) << 8);
}

std::string inflate_raw(std::string_view compressed, std::size_t expected_size) {
  z_stream strm{};
  if (inflateInit2(&strm, -15) != Z_OK) throw CorruptSource("zlib init failed");
  std::string out;
  out.resize(expected_size > 0 ? expected_size : compressed.size() * 4 + 64);
  strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  strm.avail_in = static_cast<uInt>(compressed.size());
  std::size_t written = 0;
  int ret = Z_OK;
  while (ret != Z_STREAM_END) {
    if (written == out.size()) out.resize(out.size() * 2);
    strm.next_out = reinterpret_cast<Bytef*>(out.data() + written);
    strm.avail_out = static_cast<uInt>(out.size() - written);
    ret = inflate(&strm, Z_NO_FLUSH);
    written = out.size() - strm.avail_out;
    if (ret == Z_STREAM_END) break;
    if (ret != Z_OK) {
      inflateEnd(&strm);
      throw CorruptSource("deflate stream corrupt");
    }
    if (strm.avail_in == 0 && strm.avail_out > 0) break;
  }
  inflateEnd(&strm);
  out.resize(written);
  return out;
}

// Extracts one member file from a ZIP archive (stored or deflated).
std::string zip_extract(std::string_view archive, std::string_view member) {
  constexpr std::uint32_t kEocdSig = 0x06054b50;
  constexpr std::uint32_t kCentralSig = 0x02014b50;
  constexpr std::uint32_t kLocalSig = 0x04034b50;
  if (archive.size() < 22) throw CorruptSource("zip too small");

  std::size_t eocd = std::string_view::npos;
  std::size_t scan_start = archive.size() >= 22 + 65535 ? archive.size() - 22 - 65535 : 0;
  for (std::size_t i = archive.size() - 22 + 1; i-- > scan_start;) {
    if (read_u32(archive, i) == kEocdSig) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string_view::npos) throw CorruptSource("zip end-of-central-directory not found");

  std::uint16_t entry_count = read_u16(archive, eocd + 10);
  std::uint32_t central_offset = read_u32(archive, eocd + 16);
  std::size_t pos = central_offset;
  for (std::uint16_t i = 0; i < entry_count; ++i) {
    if (pos + 46 > archive.size() || read_u32(archive, pos) != kCentralSig) {
      throw CorruptSource("zip central directory corrupt");
    }
    std::uint16_t method = read_u16(archive, pos + 10);
    std::uint32_t comp_size = read_u32(archive, pos + 20);
    std::uint32_t uncomp_size = read_u32(archive, pos + 24);
    std::uint16_t name_len = read_u16(archive, pos + 28);
    std::uint16_t extra_len = read_u16(archive, pos + 30);
    std::uint16_t comment_len = read_u16(archive, pos + 32);
    std::uint32_t local_offset = read_u32(archive, pos + 42);
    std::string_view name = archive.substr(pos + 46, name_len);
    pos += 46 + name_len + extra_len + comment_len;
    if (name != member) continue;

    if (local_offset + 30 > archive.size() || read_u32(archive, local_offset) != kLocalSig) {
      throw CorruptSource("zip local header corrupt");
    }
    std::uint16_t local_name_len = read_u16(archive, local_offset + 26);
    std::uint16_t local_extra_len = read_u16(archive, local_offset + 28);
    std::size_t data_pos = local_offset + 30 + local_name_len + local_extra_len;
    if (data_pos + comp_size > archive.size()) throw CorruptSource("zip member truncated");
    std::string_view data = archive.substr(data_pos, comp_size);
    if (method == 0) return std::string(data);
    if (method == 8) return inflate_raw(data, uncomp_size);
    throw CorruptSource("zip compression method unsupported");
  }
  throw CorruptSource("zip member not found: " + std::string(member));
}

std::string decode_xml_entities(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '&') {
      out.push_back(raw[i]);
      continue;
    }
    std::size_t end = raw.find(';', i);
    if (end == std::string_view::npos || end - i > 10) {
      out.push_back('&');
      continue;
    }
    std::string_view ent = raw.substr(i + 1, end - i - 1);
    if (ent == "amp") out.push_back('&');
    else if (ent == "lt") out.push_back('<');
    else if (ent == "gt") out.push_back('>');
    else if (ent == "quot") out.push_back('"');
    else if (ent == "apos") out.push_back('\'');
    else if (!ent.empty() && ent[0] == '#') {
      long code = 0;
      try {
        code = ent[1] == 'x' || ent[1] == 'X' ? std::stol(std::string(ent.substr(2)), nullptr, 16)
                                              : std::stol(std::string(ent.substr(1)));
      } catch (...) {
        code = 0;
      }
      if (code > 0 && code < 128) out.push_back(static_cast<char>(code));
      else out.push_back(' ');
    } else {
      out.append(raw.substr(i, end - i + 1));
    }
    i = end;
  }
  return out;
}

struct DocxWalker {
  std::string out;
  // Table state, one level deep. Word nests tables rarely; nested content
  // flows into the enclosing cell.
  int table_depth = 0;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> current_row;
  std::string current_cell;

  void text(std::string_view t) {
    if (table_depth > 0) current_cell.append(t);
    else out.append(t);
  }

  void newline() {
    if (table_depth > 0) current_cell.push_back(' ');
    else if (!out.empty() && out.back() != '\n') out.push_back('\n');
  }

  void end_table() {
    if (rows.empty()) return;
    const auto& headers = rows.front();
    bool first = true;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (!first) out.push_back('\n');
      first = false;
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        std::string header =
            c < headers.size() ? trim(headers[c]) : "Column " + std::to_string(c + 1);
        out += header;
        out += ": ";
        out += trim(rows[r][c]);
        out.push_back('\n');
      }
    }
    rows.clear();
  }
};

}  // namespace

std::string docx_to_text(std::string_view bytes) {
  std::string xml = zip_extract(bytes, "word/document.xml");
  DocxWalker walker;
  std::size_t i = 0;
  while (i < xml.size()) {
    std::size_t open = xml.find('<', i);
    if (open == std::string::npos) break;
    std::size_t close = xml.find('>', open);
    if (close == std::string::npos) throw CorruptSource("document.xml truncated");
    std::string_view tag(xml.data() + open + 1, close - open - 1);
    bool closing = !tag.empty() && tag.front() == '/';
    if (closing) tag.remove_prefix(1);
    bool self_closing = !tag.empty() && tag.back() == '/';
    if (self_closing) tag.remove_suffix(1);
    std::size_t name_end = tag.find_first_of(" \t\r\n");
    std::string_view name = name_end == std::string_view::npos ? tag : tag.substr(0, name_end);

    if (name == "w:t" && !closing && !self_closing) {
      std::size_t text_end = xml.find("</w:t>", close + 1);
      if (text_end == std::string::npos) throw CorruptSource("document.xml truncated");
      walker.text(decode_xml_entities(std::string_view(xml.data() + close + 1, text_end - close - 1)));
      i = text_end + 6;
      continue;
    }
    if (name == "w:tbl") {
      if (!closing) {
        if (walker.table_depth == 0) walker.rows.clear();
        ++walker.table_depth;
      } else {
        --walker.table_depth;
        if (walker.table_depth == 0) walker.end_table();
      }
    } else if (name == "w:tr" && walker.table_depth == 1) {
      if (!closing) walker.current_row.clear();
      else walker.rows.push_back(walker.current_row);
    } else if (name == "w:tc" && walker.table_depth == 1) {
      if (!closing) walker.current_cell.clear();
      else walker.current_row.push_back(walker.current_cell);
    } else if (name == "w:p" && closing) {
      walker.newline();
    } else if (name == "w:tab") {
      walker.text(" ");
    } else if (name == "w:br" || name == "w:cr") {
      walker.newline();
    }
    i = close + 1;
  }
  return walker.out;
}

}  // namespace samkit
