#include "samkit/corpus.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include <json.hpp>

#include "samkit/convert.hpp"
#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

using nlohmann::json;

const AssignmentRecord* CorpusManifest::find_assignment(const std::string& id) const {
  for (const auto& a : assignments) {
    if (a.assignment_id == id) return &a;
  }
  return nullptr;
}

const SubmissionRecord* CorpusManifest::find_submission(const std::string& id) const {
  for (const auto& s : submissions) {
    if (s.submission_id == id) return &s;
  }
  return nullptr;
}

std::map<std::string, std::vector<std::string>> CorpusManifest::submissions_by_assignment() const {
  std::map<std::string, std::vector<std::string>> grouped;
  for (const auto& s : submissions) grouped[s.assignment_id].push_back(s.submission_id);
  for (auto& [id, subs] : grouped) std::sort(subs.begin(), subs.end());
  return grouped;
}

bool length_filter(const AssignmentRecord& description, const SubmissionRecord& submission,
                   std::size_t threshold) {
  return description.word_count + submission.word_count <= threshold;
}

std::vector<std::string> proportional_sample(
    const std::map<std::string, std::vector<std::string>>& pool, std::size_t n,
    std::uint64_t seed) {
  // Flatten in canonical order. Drawing uniformly without replacement over
  // submissions weights each assignment by its share of the pool.
  std::vector<std::string> flat;
  for (const auto& [assignment_id, subs] : pool) {
    std::vector<std::string> sorted = subs;
    std::sort(sorted.begin(), sorted.end());
    flat.insert(flat.end(), sorted.begin(), sorted.end());
  }
  if (n > flat.size()) {
    throw InsufficientPool("requested " + std::to_string(n) + " from pool of " +
                           std::to_string(flat.size()));
  }
  std::mt19937_64 rng(seed);
  std::vector<std::string> selected;
  selected.reserve(n);
  // Partial Fisher-Yates with an explicit bounded draw so selections are
  // stable across standard libraries.
  std::size_t remaining = flat.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(bounded_rand(rng, remaining - i));
    std::swap(flat[i], flat[j]);
    selected.push_back(flat[i]);
  }
  return selected;
}

namespace {

json assignment_to_json(const AssignmentRecord& a) {
  return json{{"assignment_id", a.assignment_id},
              {"course_id", a.course_id},
              {"description_text", a.description_text},
              {"word_count", a.word_count}};
}

json submission_to_json(const SubmissionRecord& s) {
  return json{{"submission_id", s.submission_id},
              {"assignment_id", s.assignment_id},
              {"submission_text", s.submission_text},
              {"word_count", s.word_count}};
}

}  // namespace

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  std::ostringstream out;
  out << json{{"filter_threshold", manifest.filter_threshold}, {"seed", manifest.seed}}.dump()
      << '\n';
  for (const auto& a : manifest.assignments) out << assignment_to_json(a).dump() << '\n';
  for (const auto& s : manifest.submissions) out << submission_to_json(s).dump() << '\n';
  atomic_write_file(path, out.str());
}

CorpusManifest read_manifest(const std::filesystem::path& path) {
  CorpusManifest manifest;
  std::string content = read_file(path);
  for (const auto& line : split_lines(content)) {
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw CorruptSource("manifest line is not valid json: " + std::string(e.what()));
    }
    if (record.contains("description_text")) {
      AssignmentRecord a;
      a.assignment_id = record.at("assignment_id").get<std::string>();
      a.course_id = record.value("course_id", "");
      a.description_text = record.at("description_text").get<std::string>();
      a.word_count = record.value("word_count", word_count(a.description_text));
      manifest.assignments.push_back(std::move(a));
    } else if (record.contains("submission_text")) {
      SubmissionRecord s;
      s.submission_id = record.at("submission_id").get<std::string>();
      s.assignment_id = record.at("assignment_id").get<std::string>();
      s.submission_text = record.at("submission_text").get<std::string>();
      s.word_count = record.value("word_count", word_count(s.submission_text));
      manifest.submissions.push_back(std::move(s));
    } else if (record.contains("filter_threshold")) {
      manifest.filter_threshold = record.at("filter_threshold").get<std::size_t>();
      manifest.seed = record.value("seed", std::uint64_t{0});
    } else {
      throw CorruptSource("manifest line has unrecognized shape");
    }
  }
  return manifest;
}

namespace {

std::string convert_file(const std::filesystem::path& path) {
  auto format = format_from_extension(path.extension().string());
  if (!format) {
    throw UnsupportedFormat("unsupported file format: " + path.string());
  }
  std::string bytes = read_file(path);
  try {
    return to_plain_text(bytes, *format);
  } catch (const CorruptSource& e) {
    throw CorruptSource(path.string() + ": " + e.what());
  }
}

bool is_description_source(const std::filesystem::path& path) {
  return path.filename().string().rfind("description", 0) == 0 ||
         path.filename().string().rfind("rubric", 0) == 0 ||
         path.filename().string().rfind("material", 0) == 0;
}

}  // namespace

CorpusManifest ingest_directory(const std::filesystem::path& root, std::size_t threshold,
                                std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw NotFound("corpus directory not found: " + root.string());
  CorpusManifest manifest;
  manifest.filter_threshold = threshold;
  manifest.seed = seed;

  std::vector<fs::path> courses;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) courses.push_back(entry.path());
  }
  std::sort(courses.begin(), courses.end());

  for (const auto& course_dir : courses) {
    std::vector<fs::path> assignment_dirs;
    for (const auto& entry : fs::directory_iterator(course_dir)) {
      if (entry.is_directory()) assignment_dirs.push_back(entry.path());
    }
    std::sort(assignment_dirs.begin(), assignment_dirs.end());

    for (const auto& assignment_dir : assignment_dirs) {
      std::vector<fs::path> description_files;
      std::vector<fs::path> submission_files;
      for (const auto& entry : fs::directory_iterator(assignment_dir)) {
        if (entry.is_regular_file() && is_description_source(entry.path())) {
          description_files.push_back(entry.path());
        }
      }
      fs::path submissions_dir = assignment_dir / "submissions";
      if (fs::is_directory(submissions_dir)) {
        for (const auto& entry : fs::directory_iterator(submissions_dir)) {
          if (entry.is_regular_file()) submission_files.push_back(entry.path());
        }
      }
      std::sort(description_files.begin(), description_files.end());
      std::sort(submission_files.begin(), submission_files.end());
      if (description_files.empty()) continue;

      AssignmentRecord assignment;
      assignment.course_id = course_dir.filename().string();
      assignment.assignment_id = assignment.course_id + "/" + assignment_dir.filename().string();
      std::string description;
      for (const auto& file : description_files) {
        if (!description.empty()) description += "\n\n----\n\n";
        description += convert_file(file);
      }
      assignment.description_text = description;
      assignment.word_count = word_count(description);
      if (assignment.description_text.empty()) continue;

      std::vector<SubmissionRecord> kept;
      for (const auto& file : submission_files) {
        SubmissionRecord submission;
        submission.assignment_id = assignment.assignment_id;
        submission.submission_id = assignment.assignment_id + "/" + file.stem().string();
        submission.submission_text = convert_file(file);
        submission.word_count = word_count(submission.submission_text);
        if (length_filter(assignment, submission, threshold)) {
          kept.push_back(std::move(submission));
        }
      }
      if (!kept.empty()) {
        manifest.assignments.push_back(std::move(assignment));
        for (auto& s : kept) manifest.submissions.push_back(std::move(s));
      }
    }
  }
  return manifest;
}

}  // namespace samkit
