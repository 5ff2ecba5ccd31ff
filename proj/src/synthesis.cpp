#include "samkit/synthesis.hpp"

#include <fstream>

#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

namespace builtin_templates {
extern const char* const sam_description;
extern const char* const sam_submission;
extern const char* const naive_description;
extern const char* const naive_submission;
extern const char* const privacy_step1;
extern const char* const privacy_step2;
extern const char* const privacy_judge;
extern const char* const grading;
extern const char* const feedback;
extern const char* const labeling;
}  // namespace builtin_templates

const char* const kSyntheticBeginMarker = "BEGIN_SYNTHETIC";
const char* const kSyntheticEndMarker = "END_SYNTHETIC";

std::string_view method_name(Method method) {
  return method == Method::sam ? "sam" : "naive";
}

Method parse_method(std::string_view name) {
  if (name == "sam") return Method::sam;
  if (name == "naive") return Method::naive;
  throw ConfigError("unknown mimicry method: " + std::string(name));
}

PromptLibrary PromptLibrary::builtin() {
  PromptLibrary lib;
  lib.templates_ = {
      {"sam_description", builtin_templates::sam_description},
      {"sam_submission", builtin_templates::sam_submission},
      {"naive_description", builtin_templates::naive_description},
      {"naive_submission", builtin_templates::naive_submission},
      {"privacy_step1", builtin_templates::privacy_step1},
      {"privacy_step2", builtin_templates::privacy_step2},
      {"privacy_judge", builtin_templates::privacy_judge},
      {"grading", builtin_templates::grading},
      {"feedback", builtin_templates::feedback},
      {"labeling", builtin_templates::labeling},
  };
  return lib;
}

PromptLibrary PromptLibrary::from_dir(const std::filesystem::path& dir) {
  PromptLibrary lib = builtin();
  if (!std::filesystem::is_directory(dir))
    throw NotFound("template directory not found: " + dir.string());
  for (auto& [name, text] : lib.templates_) {
    auto path = dir / (name + ".txt");
    if (std::filesystem::is_regular_file(path)) text = read_file(path);
  }
  return lib;
}

const std::string& PromptLibrary::raw(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw NotFound("unknown prompt template: " + name);
  return it->second;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& vars) const {
  const std::string& tpl = raw(name);
  std::string out;
  out.reserve(tpl.size());
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    auto open = tpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tpl, pos, std::string::npos);
      break;
    }
    out.append(tpl, pos, open - pos);
    auto close = tpl.find("}}", open + 2);
    if (close == std::string::npos)
      throw TemplateError("unterminated placeholder in template " + name);
    std::string key = tpl.substr(open + 2, close - open - 2);
    auto it = vars.find(key);
    if (it == vars.end())
      throw TemplateError("no value for placeholder {{" + key + "}} in template " + name);
    out += it->second;
    pos = close + 2;
  }
  return out;
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  out.reserve(templates_.size());
  for (auto& [name, _] : templates_) out.push_back(name);
  return out;
}

namespace {

void check_task(const MimicryTask& task) {
  if (trim(task.real_description).empty())
    throw IncompleteTask("mimicry task is missing the real assignment description");
  if (task.kind == ArtifactKind::submission) {
    if (trim(task.synthetic_description).empty())
      throw IncompleteTask("submission mimicry task is missing the synthetic assignment description");
    if (trim(task.real_submission).empty())
      throw IncompleteTask("submission mimicry task is missing the real student submission");
  }
}

std::size_t effective_word_count(const MimicryTask& task) {
  if (task.real_submission_word_count > 0) return task.real_submission_word_count;
  return word_count(task.real_submission);
}

std::map<std::string, std::string> payload_vars(const MimicryTask& task) {
  std::map<std::string, std::string> vars;
  vars["real_description"] = task.real_description;
  if (task.kind == ArtifactKind::submission) {
    vars["synthetic_description"] = task.synthetic_description;
    vars["real_submission"] = task.real_submission;
  }
  return vars;
}

// A clause is spliced in after the step sentence with a separating space;
// the clause template itself carries no leading whitespace.
std::string clause(const PromptLibrary& prompts, const std::string& name) {
  std::string text = trim(prompts.raw(name));
  return text.empty() ? std::string() : " " + text;
}

}  // namespace

std::vector<Message> build_sam_prompt(const MimicryTask& task, const PromptLibrary& prompts) {
  check_task(task);
  auto vars = payload_vars(task);
  if (task.prompt_protection) {
    vars["privacy_step1"] = clause(prompts, "privacy_step1");
    vars["privacy_step2"] = clause(prompts, "privacy_step2");
  } else {
    vars["privacy_step1"] = "";
    vars["privacy_step2"] = "";
  }
  std::string name;
  if (task.kind == ArtifactKind::description) {
    name = "sam_description";
  } else {
    name = "sam_submission";
    vars["real_word_count"] = std::to_string(effective_word_count(task));
  }
  return {{"user", prompts.render(name, vars)}};
}

std::vector<Message> build_naive_prompt(const MimicryTask& task, const PromptLibrary& prompts) {
  check_task(task);
  auto vars = payload_vars(task);
  std::string name =
      task.kind == ArtifactKind::description ? "naive_description" : "naive_submission";
  return {{"user", prompts.render(name, vars)}};
}

std::vector<Message> build_mimicry_prompt(const MimicryTask& task, const PromptLibrary& prompts) {
  return task.method == Method::sam ? build_sam_prompt(task, prompts)
                                    : build_naive_prompt(task, prompts);
}

std::string extract_synthetic(const std::string& response) {
  const std::string begin = kSyntheticBeginMarker;
  const std::string end = kSyntheticEndMarker;
  // Last complete marked block wins; the model may show drafts while looping.
  std::size_t best_begin = std::string::npos;
  std::size_t best_end = std::string::npos;
  std::size_t pos = 0;
  while (true) {
    auto b = response.find(begin, pos);
    if (b == std::string::npos) break;
    auto e = response.find(end, b + begin.size());
    if (e == std::string::npos) break;
    best_begin = b + begin.size();
    best_end = e;
    pos = e + end.size();
  }
  if (best_begin == std::string::npos)
    throw ExtractionFailure("no complete synthetic block in model response");
  std::string text = trim(response.substr(best_begin, best_end - best_begin));
  if (text.empty()) throw ExtractionFailure("synthetic block in model response is empty");
  return text;
}

SyntheticPair synthesize(const MimicryTask& task, const ModelSpec& generator, Gateway& gateway,
                         const PromptLibrary& prompts, const SynthesisOptions& options) {
  auto messages = build_mimicry_prompt(task, prompts);
  SyntheticPair pair;
  pair.source_id = options.source_id;
  pair.method = task.method;
  pair.generator = generator;
  int max_attempts = 1 + std::max(0, options.extraction_retries);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    pair.attempts = attempt;
    Completion completion = gateway.complete(generator, messages);
    try {
      pair.synthetic_text = extract_synthetic(completion.text);
      pair.extraction_ok = true;
      return pair;
    } catch (const ExtractionFailure&) {
      if (attempt == max_attempts) break;
    }
  }
  pair.synthetic_text.clear();
  pair.extraction_ok = false;
  return pair;
}

}  // namespace samkit
