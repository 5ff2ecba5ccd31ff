#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "samkit/gateway.hpp"

namespace samkit {

enum class ArtifactKind { description, submission };
enum class Method { sam, naive };

std::string_view method_name(Method method);
Method parse_method(std::string_view name);

struct MimicryTask {
  ArtifactKind kind = ArtifactKind::description;
  std::string real_description;
  std::string synthetic_description;       // required iff kind == submission
  std::string real_submission;             // required iff kind == submission
  std::size_t real_submission_word_count = 0;
  Method method = Method::sam;
  bool prompt_protection = false;
};

struct SyntheticPair {
  std::string source_id;
  std::string synthetic_text;
  Method method = Method::sam;
  ModelSpec generator;
  int attempts = 1;
  bool extraction_ok = false;
};

/// Named prompt templates with {{placeholder}} substitution. Templates ship
/// as editable text files; compiled-in defaults are used when no override
/// directory is given.
class PromptLibrary {
 public:
  static PromptLibrary builtin();
  // Builtins overlaid with any <name>.txt files found in `dir`.
  static PromptLibrary from_dir(const std::filesystem::path& dir);

  const std::string& raw(const std::string& name) const;
  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& vars) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::string> templates_;
};

extern const char* const kSyntheticBeginMarker;
extern const char* const kSyntheticEndMarker;

/// Four-step mimicry prompt. Embeds the real artifact(s), the literal real
/// word count for submissions, and the privacy clause when prompt_protection
/// is set.
std::vector<Message> build_sam_prompt(const MimicryTask& task, const PromptLibrary& prompts);

/// Baseline prompt: one plain imitation sentence plus the same payload as the
/// SAM prompt, no step structure and no privacy clause.
std::vector<Message> build_naive_prompt(const MimicryTask& task, const PromptLibrary& prompts);

// Dispatch on task.method.
std::vector<Message> build_mimicry_prompt(const MimicryTask& task, const PromptLibrary& prompts);

/// Content between the last BEGIN_SYNTHETIC/END_SYNTHETIC pair, trimmed.
/// Throws ExtractionFailure when no non-empty marked block exists.
std::string extract_synthetic(const std::string& response);

struct SynthesisOptions {
  int extraction_retries = 2;
  std::string source_id;
};

/// Build the prompt, call the generator through the gateway and extract the
/// synthetic text, retrying generation on extraction failure up to the retry
/// cap. A pair with extraction_ok=false is returned when every attempt fails.
SyntheticPair synthesize(const MimicryTask& task, const ModelSpec& generator, Gateway& gateway,
                         const PromptLibrary& prompts, const SynthesisOptions& options = {});

}  // namespace samkit
