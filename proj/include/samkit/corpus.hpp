#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace samkit {

struct AssignmentRecord {
  std::string assignment_id;
  std::string course_id;
  // Rubrics and supplementary materials are concatenated in source order.
  std::string description_text;
  std::size_t word_count = 0;
};

struct SubmissionRecord {
  std::string submission_id;
  std::string assignment_id;
  std::string submission_text;
  std::size_t word_count = 0;
};

struct CorpusManifest {
  std::vector<AssignmentRecord> assignments;
  std::vector<SubmissionRecord> submissions;
  std::size_t filter_threshold = 7500;
  std::uint64_t seed = 0;

  const AssignmentRecord* find_assignment(const std::string& id) const;
  const SubmissionRecord* find_submission(const std::string& id) const;
  // submission ids grouped per assignment, in deterministic order
  std::map<std::string, std::vector<std::string>> submissions_by_assignment() const;
};

/// Keep/drop decision for one (description, submission) pair. Keeps the pair
/// when the combined word count is at most `threshold` (boundary inclusive).
bool length_filter(const AssignmentRecord& description, const SubmissionRecord& submission,
                   std::size_t threshold);

/// Sample `n` submission ids without replacement, selection probability
/// proportional to each assignment's share of the pool. Deterministic for a
/// fixed seed. Throws InsufficientPool when n exceeds the pool size.
std::vector<std::string> proportional_sample(
    const std::map<std::string, std::vector<std::string>>& pool, std::size_t n,
    std::uint64_t seed);

/// Walk a corpus directory (<course>/<assignment>/description.* plus
/// submissions/*), convert every file to plain text, apply the length filter
/// and assemble the manifest.
CorpusManifest ingest_directory(const std::filesystem::path& root, std::size_t threshold,
                                std::uint64_t seed);

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);
CorpusManifest read_manifest(const std::filesystem::path& path);

}  // namespace samkit
