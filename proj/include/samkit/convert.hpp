#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace samkit {

enum class SourceFormat { pdf, txt, sql, py, docx, ipynb, rmd };

std::optional<SourceFormat> parse_format_tag(std::string_view tag);
// Maps a file extension (with or without leading dot) to a format tag.
std::optional<SourceFormat> format_from_extension(std::string_view ext);
std::string_view format_tag_name(SourceFormat format);

/// Convert one source file to plain text.
///
/// Tables are linearized into "Header: cell" lines per row, code is kept
/// verbatim, and the result never contains binary residue. Unreadable input
/// throws CorruptSource; pdf extraction is best-effort and throws
/// CorruptSource when no text can be recovered.
std::string to_plain_text(std::string_view bytes, SourceFormat format);

// Rewrites markdown pipe tables as "Header: cell" lines per row; all other
// lines pass through unchanged. Used for rmd sources and notebook markdown.
std::string linearize_markdown_tables(std::string_view text);

}  // namespace samkit
