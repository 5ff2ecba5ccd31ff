#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "samkit/corpus.hpp"
#include "samkit/gateway.hpp"
#include "samkit/grading.hpp"
#include "samkit/privacy.hpp"
#include "samkit/synthesis.hpp"
#include "samkit/utility_eval.hpp"

namespace samkit {

struct CorpusConfig {
  std::filesystem::path root;
  std::size_t filter_threshold = 7500;
};

struct GatewaySection {
  std::string provider = "mock";  // mock | echo | http
  RetryPolicy retry;
  int inflight_limit = 8;
};

struct SynthesisSection {
  std::vector<Method> methods{Method::sam, Method::naive};
  ModelSpec description_model;  // defaults set in default_run_config
  ModelSpec submission_model;
  ModelSpec judge_model;
  bool prompt_protection = true;
  bool gate_protection = true;
  int max_regen = 5;
  int extraction_retries = 2;
  int parallelism = 4;
};

struct GradingSection {
  std::vector<ModelSpec> graders;
  GradeOptions options;
};

struct ResemblanceSection {
  std::size_t sample = 0;  // 0 = every eligible pair
  std::size_t embed_dim = 64;
};

struct UtilitySection {
  std::vector<ModelSpec> feedback_models;
  std::size_t per_model = 100;
  ModelSpec labeler;
  Method method = Method::sam;  // synthetic cohort compared against the real one
  std::filesystem::path registry_file;
  int parallelism = 4;
};

struct MatrixSection {
  std::vector<ModelSpec> description_candidates;
  std::vector<ModelSpec> submission_candidates;
  std::size_t sample = 200;
  std::string fixed_description_model;  // label; empty = best length PCC wins
  bool parallel_cells = false;
};

struct RunConfig {
  std::uint64_t seed = 7;
  CorpusConfig corpus;
  GatewaySection gateway;
  SynthesisSection synthesis;
  GradingSection grading;
  ResemblanceSection resemblance;
  UtilitySection utility;
  MatrixSection matrix;
  std::filesystem::path templates_dir;  // empty = compiled-in templates
};

RunConfig default_run_config();
RunConfig load_run_config(const std::filesystem::path& path);  // ConfigError on bad input
// Stable JSON rendering used for the per-run config snapshot.
std::string canonical_config_json(const RunConfig& config);

struct RunContext {
  std::filesystem::path run_dir;
  RunConfig config;
  GatewayMode mode = GatewayMode::replay;
  // Test hook: used instead of the configured provider when set. Replay mode
  // always gets a failing provider so cassettes are the only source.
  std::shared_ptr<Provider> provider_override;
};

std::shared_ptr<Provider> make_provider(const RunContext& ctx);
Gateway make_gateway(const RunContext& ctx);
PromptLibrary load_prompts(const RunConfig& config);

std::filesystem::path manifest_path(const std::filesystem::path& run_dir);

/// Ingest the corpus directory named in the config into <run_dir>/manifest.jsonl.
CorpusManifest run_ingest(const RunContext& ctx);

struct StageStats {
  std::size_t completed = 0;  // items newly finished by this invocation
  std::size_t skipped = 0;    // items the ledger already had as done
  std::size_t failed = 0;
  std::size_t permanent_failed = 0;
  bool aborted = false;
};

struct SynthesizeOptions {
  // Test hook: stop scheduling new items once this many items finished in
  // this invocation (simulates a mid-run kill). 0 = run to completion.
  int abort_after = 0;
};

/// Synthesize descriptions and submissions for every configured method.
/// Submissions run strictly after their assignment's description. Writes
/// per-item artifacts plus descriptions.jsonl / pairs.jsonl once all items
/// are accounted for.
StageStats run_synthesize(const RunContext& ctx, const SynthesizeOptions& options = {});

/// Post-hoc identity-leak pass over every published synthetic submission,
/// one judge verdict per pair; writes <run_dir>/eval/gate.json.
StageStats run_gate(const RunContext& ctx);

/// Panel-grade the evaluation sample: each real submission once and each
/// method's published synthetic counterpart.
StageStats run_grade(const RunContext& ctx);

/// Fidelity statistics for the evaluation sample; writes
/// <run_dir>/eval/resemblance.json (series included for the plots).
void run_eval_resemblance(const RunContext& ctx);

/// Feedback generation + labeling over the utility sample; writes per-record
/// labels, an aspect summary CSV and <run_dir>/eval/utility.json.
StageStats run_eval_utility(const RunContext& ctx);

/// Four-cell protection ablation over every submission pair; writes
/// <run_dir>/eval/ablation.json.
void run_ablate_privacy(const RunContext& ctx);

/// Model-choice matrix: each description candidate synthesizes the sampled
/// assignments, the best length-PCC candidate's descriptions are fixed, then
/// each submission candidate synthesizes the sampled submissions and is
/// scored. Writes <run_dir>/eval/matrix.json.
StageStats run_matrix(const RunContext& ctx);

/// Render tables and plots from whatever eval outputs exist into
/// <run_dir>/report/. Resemblance results are required, everything else is
/// optional. Byte-stable and idempotent.
void run_report(const RunContext& ctx);

}  // namespace samkit
