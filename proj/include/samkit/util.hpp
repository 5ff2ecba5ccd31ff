#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace samkit {

// Whitespace-delimited word count. This is the single definition of "word"
// used by the length filter, prompt word counts and length metrics.
std::size_t word_count(std::string_view text);

// Rough token estimate from a word count (4 tokens per 3 words, rounded up).
std::size_t estimate_tokens(std::size_t words);

std::string trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);
// Maximal runs of alphanumeric characters.
std::vector<std::string> alnum_tokens(std::string_view text);
// Whitespace-separated tokens, punctuation kept attached.
std::vector<std::string> whitespace_tokens(std::string_view text);
bool contains_word(std::string_view text, std::string_view word);

// Fixed-point formatting with a '.' decimal separator regardless of locale.
std::string format_fixed(double value, int decimals);

// FNV-1a 64-bit. Stable across platforms; used for deterministic seeds.
std::uint64_t fnv1a64(std::string_view data);

std::string sha256_hex(std::string_view data);

// Uniform integer in [0, n) with rejection sampling. std::uniform_int_distribution
// is implementation-defined, which would break replay determinism across stdlibs.
std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t n);

// Regularized incomplete beta function I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

// File helpers. Writes go through a temp file and rename.
std::string read_file(const std::filesystem::path& path);
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace samkit
