#include "samkit/privacy.hpp"

#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

std::vector<Message> build_judge_prompt(const std::string& real_text,
                                        const std::string& synthetic_text,
                                        const PromptLibrary& prompts) {
  if (trim(real_text).empty() || trim(synthetic_text).empty())
    throw EmptyText("judge prompt needs both a real and a synthetic text");
  return {{"user", prompts.render("privacy_judge", {{"real_submission", real_text},
                                                    {"synthetic_submission", synthetic_text}})}};
}

bool parse_verdict(const std::string& judge_output) {
  std::size_t non_empty = 0;
  for (auto& line : split_lines(judge_output))
    if (!trim(line).empty()) ++non_empty;
  if (non_empty < 2) return true;  // malformed verdict, fail closed
  return contains_word(judge_output, "YES");
}

GatedResult gated_synthesize(const MimicryTask& task, const ModelSpec& generator,
                             const ModelSpec& judge, Gateway& gateway,
                             const PromptLibrary& prompts, const GateOptions& options) {
  GatedResult result;
  result.gated = options.gate_protection;
  if (!options.gate_protection) {
    result.pair = synthesize(task, generator, gateway, prompts, options.synthesis);
    result.history.push_back({1, result.pair.extraction_ok, false});
    result.published = result.pair.extraction_ok;
    return result;
  }
  const std::string& real_text =
      task.kind == ArtifactKind::submission ? task.real_submission : task.real_description;
  int budget = std::max(1, options.max_regen);
  for (int generation = 1; generation <= budget; ++generation) {
    result.pair = synthesize(task, generator, gateway, prompts, options.synthesis);
    GateAttempt attempt{generation, result.pair.extraction_ok, false};
    if (!result.pair.extraction_ok) {
      attempt.leak = false;
      result.history.push_back(attempt);
      continue;  // a failed generation consumes budget like a flagged one
    }
    auto verdict_messages = build_judge_prompt(real_text, result.pair.synthetic_text, prompts);
    Completion verdict = gateway.complete(judge, verdict_messages);
    attempt.leak = parse_verdict(verdict.text);
    result.history.push_back(attempt);
    if (!attempt.leak) {
      result.published = true;
      return result;
    }
  }
  result.published = false;
  return result;
}

double protection_rate(std::size_t clean, std::size_t total) {
  if (total == 0) throw EmptyInput("no artifacts to compute a protection rate over");
  return static_cast<double>(clean) / static_cast<double>(total);
}

std::vector<AblationCell> run_ablation(const std::vector<MimicryTask>& tasks,
                                       const ModelSpec& generator, const ModelSpec& judge,
                                       Gateway& gateway, const PromptLibrary& prompts,
                                       const AblationOptions& options) {
  if (tasks.empty()) throw EmptyInput("ablation needs at least one mimicry task");
  struct CellConfig {
    Method method;
    bool prompt_protection;
    bool gate_protection;
  };
  static const CellConfig kCells[] = {
      {Method::naive, false, false},
      {Method::sam, true, true},
      {Method::sam, true, false},
      {Method::sam, false, true},
  };
  std::vector<AblationCell> cells;
  for (const auto& config : kCells) {
    AblationCell cell;
    cell.method = config.method;
    cell.prompt_protection = config.prompt_protection;
    cell.gate_protection = config.gate_protection;
    for (const auto& base : tasks) {
      MimicryTask task = base;
      task.method = config.method;
      task.prompt_protection = config.prompt_protection;
      GateOptions gate;
      gate.gate_protection = config.gate_protection;
      gate.max_regen = options.max_regen;
      gate.synthesis = options.synthesis;
      GatedResult result = gated_synthesize(task, generator, judge, gateway, prompts, gate);
      if (!result.published) continue;
      ++cell.published;
      const std::string& real_text =
          task.kind == ArtifactKind::submission ? task.real_submission : task.real_description;
      Completion verdict = gateway.complete(
          judge, build_judge_prompt(real_text, result.pair.synthetic_text, prompts));
      if (!parse_verdict(verdict.text)) ++cell.clean;
    }
    cell.rate = protection_rate(cell.clean, cell.published);
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace samkit
