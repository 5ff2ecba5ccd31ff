#pragma once

#include <string>
#include <vector>

#include "samkit/gateway.hpp"
#include "samkit/synthesis.hpp"

namespace samkit {

/// Three-step identity-leak check comparing a real and a synthetic text.
std::vector<Message> build_judge_prompt(const std::string& real_text,
                                        const std::string& synthetic_text,
                                        const PromptLibrary& prompts);

/// True when the judge output flags a carried-over identity: a standalone
/// uppercase YES token anywhere in the reply. Replies with fewer than two
/// non-empty lines fail closed as a leak.
bool parse_verdict(const std::string& judge_output);

struct GateAttempt {
  int generation = 0;
  bool extraction_ok = false;
  bool leak = false;
};

struct GatedResult {
  SyntheticPair pair;  // last generation
  std::vector<GateAttempt> history;
  bool gated = false;
  bool published = false;
};

struct GateOptions {
  bool gate_protection = true;
  int max_regen = 5;  // total generation budget, not extra retries
  SynthesisOptions synthesis;
};

/// Generate-judge-regenerate loop. Each generation that fails extraction or
/// is flagged by the judge consumes one unit of the max_regen budget; a task
/// still flagged after the budget comes back with published=false.
GatedResult gated_synthesize(const MimicryTask& task, const ModelSpec& generator,
                             const ModelSpec& judge, Gateway& gateway,
                             const PromptLibrary& prompts, const GateOptions& options = {});

/// clean / total. Throws EmptyInput when total is zero.
double protection_rate(std::size_t clean, std::size_t total);

struct AblationCell {
  Method method = Method::sam;
  bool prompt_protection = false;
  bool gate_protection = false;
  std::size_t published = 0;
  std::size_t clean = 0;
  double rate = 0.0;
};

struct AblationOptions {
  int max_regen = 5;
  SynthesisOptions synthesis;
};

/// Four protection configurations over the same tasks, in report row order:
/// naive without protections, then mimicry with both, prompt-only and
/// gate-only. Rates come from one post-hoc judge pass over each cell's
/// published artifacts so every cell is measured with the same instrument.
std::vector<AblationCell> run_ablation(const std::vector<MimicryTask>& tasks,
                                       const ModelSpec& generator, const ModelSpec& judge,
                                       Gateway& gateway, const PromptLibrary& prompts,
                                       const AblationOptions& options = {});

}  // namespace samkit
