#include "samkit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "samkit/errors.hpp"
#include "samkit/metrics.hpp"
#include "samkit/report.hpp"
#include "samkit/runstore.hpp"
#include "samkit/util.hpp"

namespace samkit {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kStageDesc = "synthesize_description";
constexpr const char* kStageSub = "synthesize_submission";
constexpr const char* kStageGate = "gate";
constexpr const char* kStageGrade = "grade";
constexpr const char* kStageUtility = "utility";
constexpr const char* kStageAblation = "ablation";
constexpr const char* kStageMatrixDesc = "matrix_desc";
constexpr const char* kStageMatrixSub = "matrix_sub";
constexpr const char* kStageMatrixGrade = "matrix_grade";

// ---------------------------------------------------------------------------
// config

std::string spec_to_string(const ModelSpec& spec) {
  std::string out = spec.model_id;
  if (spec.reasoning_effort != Effort::none) {
    out += ':';
    out += effort_name(spec.reasoning_effort);
  }
  return out;
}

json specs_to_json(const std::vector<ModelSpec>& specs) {
  json out = json::array();
  for (const auto& spec : specs) out.push_back(spec_to_string(spec));
  return out;
}

std::vector<ModelSpec> specs_from_json(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.empty())
    throw ConfigError("config: " + where + " must be a non-empty array of model specs");
  std::vector<ModelSpec> specs;
  for (const auto& entry : arr) {
    if (!entry.is_string()) throw ConfigError("config: " + where + " entries must be strings");
    specs.push_back(parse_model_spec(entry.get<std::string>()));
  }
  return specs;
}

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed)
      if (it.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("config: unknown key '" + it.key() + "' in section '" + section + "'");
  }
}

}  // namespace

RunConfig default_run_config() {
  RunConfig config;
  config.synthesis.description_model = parse_model_spec("o3-pro:high");
  config.synthesis.submission_model = parse_model_spec("o4-mini:high");
  config.synthesis.judge_model = parse_model_spec("o4-mini:high");
  config.grading.graders = {parse_model_spec("o3:high"), parse_model_spec("o4-mini:high"),
                            parse_model_spec("gpt-4.1")};
  config.utility.feedback_models = {
      parse_model_spec("gpt-4.1-nano"),          parse_model_spec("gpt-4.1"),
      parse_model_spec("o4-mini:high"),          parse_model_spec("o3:high"),
      parse_model_spec("gemini-2.0-flash-lite"), parse_model_spec("gemini-2.0-flash"),
      parse_model_spec("gemini-2.5-flash"),      parse_model_spec("gemini-2.5-pro"),
      parse_model_spec("deepseek-r1-0528"),      parse_model_spec("deepseek-v3-0324")};
  config.utility.labeler = parse_model_spec("o4-mini:high");
  config.matrix.description_candidates = {
      parse_model_spec("gpt-4.1"),      parse_model_spec("o4-mini:high"),
      parse_model_spec("o3:medium"),    parse_model_spec("o3:high"),
      parse_model_spec("o3-pro:medium"), parse_model_spec("o3-pro:high")};
  config.matrix.submission_candidates = {
      parse_model_spec("gpt-4.1-nano"), parse_model_spec("gpt-4.1-mini"),
      parse_model_spec("gpt-4.1"),      parse_model_spec("o4-mini:high"),
      parse_model_spec("o3:medium"),    parse_model_spec("o3:high")};
  return config;
}

RunConfig load_run_config(const fs::path& path) {
  json parsed = json::parse(read_file(path), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object())
    throw ConfigError("config: " + path.string() + " is not a JSON object");
  check_keys(parsed, "(root)",
             {"seed", "corpus", "gateway", "synthesis", "grading", "resemblance", "utility",
              "matrix", "templates"});
  RunConfig config = default_run_config();
  try {
    if (parsed.contains("seed")) config.seed = parsed["seed"].get<std::uint64_t>();
    if (parsed.contains("templates"))
      config.templates_dir = parsed["templates"].get<std::string>();
    if (parsed.contains("corpus")) {
      const json& section = parsed["corpus"];
      check_keys(section, "corpus", {"root", "filter_threshold"});
      if (section.contains("root")) config.corpus.root = section["root"].get<std::string>();
      if (section.contains("filter_threshold"))
        config.corpus.filter_threshold = section["filter_threshold"].get<std::size_t>();
    }
    if (parsed.contains("gateway")) {
      const json& section = parsed["gateway"];
      check_keys(section, "gateway", {"provider", "inflight_limit", "retry"});
      if (section.contains("provider"))
        config.gateway.provider = section["provider"].get<std::string>();
      if (section.contains("inflight_limit"))
        config.gateway.inflight_limit = section["inflight_limit"].get<int>();
      if (section.contains("retry")) {
        const json& retry = section["retry"];
        check_keys(retry, "gateway.retry", {"max_retries", "initial_backoff_ms", "backoff_factor"});
        if (retry.contains("max_retries"))
          config.gateway.retry.max_retries = retry["max_retries"].get<int>();
        if (retry.contains("initial_backoff_ms"))
          config.gateway.retry.initial_backoff =
              std::chrono::milliseconds(retry["initial_backoff_ms"].get<int>());
        if (retry.contains("backoff_factor"))
          config.gateway.retry.backoff_factor = retry["backoff_factor"].get<double>();
      }
    }
    if (parsed.contains("synthesis")) {
      const json& section = parsed["synthesis"];
      check_keys(section, "synthesis",
                 {"methods", "description_model", "submission_model", "judge_model",
                  "prompt_protection", "gate_protection", "max_regen", "extraction_retries",
                  "parallelism"});
      if (section.contains("methods")) {
        const json& methods = section["methods"];
        if (!methods.is_array() || methods.empty())
          throw ConfigError("config: synthesis.methods must be a non-empty array");
        config.synthesis.methods.clear();
        for (const auto& name : methods)
          config.synthesis.methods.push_back(parse_method(name.get<std::string>()));
      }
      if (section.contains("description_model"))
        config.synthesis.description_model =
            parse_model_spec(section["description_model"].get<std::string>());
      if (section.contains("submission_model"))
        config.synthesis.submission_model =
            parse_model_spec(section["submission_model"].get<std::string>());
      if (section.contains("judge_model"))
        config.synthesis.judge_model = parse_model_spec(section["judge_model"].get<std::string>());
      if (section.contains("prompt_protection"))
        config.synthesis.prompt_protection = section["prompt_protection"].get<bool>();
      if (section.contains("gate_protection"))
        config.synthesis.gate_protection = section["gate_protection"].get<bool>();
      if (section.contains("max_regen"))
        config.synthesis.max_regen = section["max_regen"].get<int>();
      if (section.contains("extraction_retries"))
        config.synthesis.extraction_retries = section["extraction_retries"].get<int>();
      if (section.contains("parallelism"))
        config.synthesis.parallelism = section["parallelism"].get<int>();
    }
    if (parsed.contains("grading")) {
      const json& section = parsed["grading"];
      check_keys(section, "grading", {"graders", "min_mark", "max_mark", "reprompts"});
      if (section.contains("graders"))
        config.grading.graders = specs_from_json(section["graders"], "grading.graders");
      if (section.contains("min_mark"))
        config.grading.options.min_mark = section["min_mark"].get<double>();
      if (section.contains("max_mark"))
        config.grading.options.max_mark = section["max_mark"].get<double>();
      if (section.contains("reprompts"))
        config.grading.options.reprompts = section["reprompts"].get<int>();
    }
    if (parsed.contains("resemblance")) {
      const json& section = parsed["resemblance"];
      check_keys(section, "resemblance", {"sample", "embed_dim"});
      if (section.contains("sample"))
        config.resemblance.sample = section["sample"].get<std::size_t>();
      if (section.contains("embed_dim"))
        config.resemblance.embed_dim = section["embed_dim"].get<std::size_t>();
    }
    if (parsed.contains("utility")) {
      const json& section = parsed["utility"];
      check_keys(section, "utility",
                 {"models", "per_model", "labeler", "method", "registry", "parallelism"});
      if (section.contains("models"))
        config.utility.feedback_models = specs_from_json(section["models"], "utility.models");
      if (section.contains("per_model"))
        config.utility.per_model = section["per_model"].get<std::size_t>();
      if (section.contains("labeler"))
        config.utility.labeler = parse_model_spec(section["labeler"].get<std::string>());
      if (section.contains("method"))
        config.utility.method = parse_method(section["method"].get<std::string>());
      if (section.contains("registry"))
        config.utility.registry_file = section["registry"].get<std::string>();
      if (section.contains("parallelism"))
        config.utility.parallelism = section["parallelism"].get<int>();
    }
    if (parsed.contains("matrix")) {
      const json& section = parsed["matrix"];
      check_keys(section, "matrix",
                 {"description_candidates", "submission_candidates", "sample",
                  "fixed_description_model", "parallel_cells"});
      if (section.contains("description_candidates"))
        config.matrix.description_candidates =
            specs_from_json(section["description_candidates"], "matrix.description_candidates");
      if (section.contains("submission_candidates"))
        config.matrix.submission_candidates =
            specs_from_json(section["submission_candidates"], "matrix.submission_candidates");
      if (section.contains("sample")) config.matrix.sample = section["sample"].get<std::size_t>();
      if (section.contains("fixed_description_model"))
        config.matrix.fixed_description_model =
            section["fixed_description_model"].get<std::string>();
      if (section.contains("parallel_cells"))
        config.matrix.parallel_cells = section["parallel_cells"].get<bool>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return config;
}

// The snapshot freezes only parameters that two or more stages consume, so a
// resume cannot silently mix them. Single-stage parameters are recorded in
// that stage's own outputs; worker counts and other operational knobs are
// free to vary between invocations.
std::string canonical_config_json(const RunConfig& config) {
  json methods = json::array();
  for (Method method : config.synthesis.methods) methods.push_back(std::string(method_name(method)));
  json out{
      {"seed", config.seed},
      {"templates", config.templates_dir.string()},
      {"gateway",
       {{"provider", config.gateway.provider},
        {"inflight_limit", config.gateway.inflight_limit},
        {"retry",
         {{"max_retries", config.gateway.retry.max_retries},
          {"initial_backoff_ms",
           static_cast<int>(config.gateway.retry.initial_backoff.count())},
          {"backoff_factor", config.gateway.retry.backoff_factor}}}}},
      {"synthesis",
       {{"methods", methods},
        {"description_model", spec_to_string(config.synthesis.description_model)},
        {"submission_model", spec_to_string(config.synthesis.submission_model)},
        {"judge_model", spec_to_string(config.synthesis.judge_model)},
        {"prompt_protection", config.synthesis.prompt_protection},
        {"gate_protection", config.synthesis.gate_protection},
        {"max_regen", config.synthesis.max_regen},
        {"extraction_retries", config.synthesis.extraction_retries}}},
      {"grading",
       {{"graders", specs_to_json(config.grading.graders)},
        {"min_mark", config.grading.options.min_mark},
        {"max_mark", config.grading.options.max_mark},
        {"reprompts", config.grading.options.reprompts}}},
      {"resemblance",
       {{"sample", config.resemblance.sample}, {"embed_dim", config.resemblance.embed_dim}}}};
  return out.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// context plumbing

std::shared_ptr<Provider> make_provider(const RunContext& ctx) {
  if (ctx.mode == GatewayMode::replay) return std::make_shared<FailingProvider>();
  if (ctx.provider_override) return ctx.provider_override;
  const std::string& name = ctx.config.gateway.provider;
  if (name == "mock") return std::make_shared<MockProvider>();
  if (name == "echo") return std::make_shared<EchoProvider>();
  if (name == "http") return std::make_shared<HttpProvider>();
  throw ConfigError("config: unknown gateway provider '" + name + "'");
}

Gateway make_gateway(const RunContext& ctx) {
  GatewayConfig config;
  config.mode = ctx.mode;
  config.run_dir = ctx.run_dir;
  config.retry = ctx.config.gateway.retry;
  config.inflight_limit = ctx.config.gateway.inflight_limit;
  return Gateway(config, make_provider(ctx));
}

PromptLibrary load_prompts(const RunConfig& config) {
  if (config.templates_dir.empty()) return PromptLibrary::builtin();
  return PromptLibrary::from_dir(config.templates_dir);
}

fs::path manifest_path(const fs::path& run_dir) { return run_dir / "manifest.jsonl"; }

namespace {

json load_json_file(const fs::path& path) {
  json parsed = json::parse(read_file(path), nullptr, false);
  if (parsed.is_discarded()) throw CorruptSource("unparsable JSON: " + path.string());
  return parsed;
}

std::vector<json> load_jsonl(const fs::path& path) {
  std::vector<json> lines;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded())
      throw CorruptSource("unparsable JSON line in " + path.string());
    lines.push_back(std::move(parsed));
  }
  return lines;
}

void write_json_file(const fs::path& path, const json& value) {
  atomic_write_file(path, value.dump(2) + "\n");
}

std::string item_name(Method method, const std::string& id) {
  return std::string(method_name(method)) + ":" + id;
}

fs::path item_file(const fs::path& dir, const std::string& item) {
  return dir / (sanitize_item(item) + ".json");
}

// Minimal pool for stage fan-out; tasks must not submit new tasks.
class TaskPool {
 public:
  explicit TaskPool(int workers) {
    int n = std::max(1, workers);
    for (int i = 0; i < n; ++i) threads_.emplace_back([this] { worker(); });
  }

  ~TaskPool() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& thread : threads_) thread.join();
  }

  void submit(std::function<void()> fn) {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      queue_.push_back(std::move(fn));
    }
    cv_.notify_one();
  }

  void wait_idle() {
    std::unique_lock<std::mutex> lock(mutex_);
    idle_cv_.wait(lock, [this] { return queue_.empty() && active_ == 0; });
  }

 private:
  void worker() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
        if (stop_ && queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
        ++active_;
      }
      task();
      {
        std::lock_guard<std::mutex> lock(mutex_);
        --active_;
        if (queue_.empty() && active_ == 0) idle_cv_.notify_all();
      }
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<std::function<void()>> queue_;
  std::vector<std::thread> threads_;
  int active_ = 0;
  bool stop_ = false;
};

std::vector<Method> sorted_methods(const RunConfig& config) {
  std::vector<Method> methods = config.synthesis.methods;
  std::sort(methods.begin(), methods.end(), [](Method a, Method b) {
    return method_name(a) < method_name(b);
  });
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  return methods;
}

struct PairRow {
  std::string assignment_id;
  std::string submission_id;
  std::string method;
  std::string synthetic_text;
  int attempts = 0;
  bool extraction_ok = false;
  bool published = false;
  bool gated = false;
};

// method name -> submission id -> row
using PairIndex = std::map<std::string, std::map<std::string, PairRow>>;
// method name -> assignment id -> synthetic description
using DescIndex = std::map<std::string, std::map<std::string, std::string>>;

PairIndex load_pair_index(const fs::path& run_dir) {
  if (!fs::exists(run_dir / "pairs.jsonl"))
    throw IncompleteInputs("no assembled pairs; run synthesize to completion first");
  PairIndex index;
  for (const auto& line : load_jsonl(run_dir / "pairs.jsonl")) {
    PairRow row;
    row.assignment_id = line.at("assignment_id").get<std::string>();
    row.submission_id = line.at("submission_id").get<std::string>();
    row.method = line.at("method").get<std::string>();
    row.synthetic_text = line.at("synthetic_text").get<std::string>();
    row.attempts = line.at("attempts").get<int>();
    row.extraction_ok = line.at("extraction_ok").get<bool>();
    row.published = line.at("published").get<bool>();
    row.gated = line.at("gated").get<bool>();
    index[row.method][row.submission_id] = std::move(row);
  }
  return index;
}

DescIndex load_desc_index(const fs::path& run_dir) {
  if (!fs::exists(run_dir / "descriptions.jsonl"))
    throw IncompleteInputs("no assembled descriptions; run synthesize to completion first");
  DescIndex index;
  for (const auto& line : load_jsonl(run_dir / "descriptions.jsonl")) {
    index[line.at("method").get<std::string>()][line.at("assignment_id").get<std::string>()] =
        line.at("synthetic_text").get<std::string>();
  }
  return index;
}

// Submission ids published under every configured method, grouped per
// assignment; this is the pool both grading and the fidelity evaluation
// sample from, so the two stages always agree.
std::map<std::string, std::vector<std::string>> eligible_pool(const CorpusManifest& manifest,
                                                              const PairIndex& pairs,
                                                              const RunConfig& config) {
  auto methods = sorted_methods(config);
  std::map<std::string, std::vector<std::string>> pool;
  for (const auto& [assignment_id, sub_ids] : manifest.submissions_by_assignment()) {
    std::vector<std::string> eligible;
    for (const auto& sub_id : sub_ids) {
      bool ok = true;
      for (Method method : methods) {
        auto by_method = pairs.find(std::string(method_name(method)));
        if (by_method == pairs.end()) {
          ok = false;
          break;
        }
        auto row = by_method->second.find(sub_id);
        if (row == by_method->second.end() || !row->second.published) {
          ok = false;
          break;
        }
      }
      if (ok) eligible.push_back(sub_id);
    }
    if (!eligible.empty()) pool[assignment_id] = std::move(eligible);
  }
  return pool;
}

std::vector<std::string> evaluation_sample(const CorpusManifest& manifest, const PairIndex& pairs,
                                           const RunConfig& config) {
  auto pool = eligible_pool(manifest, pairs, config);
  std::vector<std::string> ids;
  if (config.resemblance.sample == 0) {
    for (const auto& [assignment_id, sub_ids] : pool)
      ids.insert(ids.end(), sub_ids.begin(), sub_ids.end());
  } else {
    ids = proportional_sample(pool, config.resemblance.sample, config.seed);
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw IncompleteInputs("no published pairs to evaluate; run synthesize first");
  return ids;
}

std::string failure_reason(const Error& e) {
  std::string reason = e.what();
  if (reason.size() > 500) reason.resize(500);
  return reason;
}

}  // namespace

// ---------------------------------------------------------------------------
// stages

CorpusManifest run_ingest(const RunContext& ctx) {
  if (ctx.config.corpus.root.empty())
    throw ConfigError("config: corpus.root is required for ingest");
  ensure_config_snapshot(ctx.run_dir, canonical_config_json(ctx.config));
  CorpusManifest manifest =
      ingest_directory(ctx.config.corpus.root, ctx.config.corpus.filter_threshold, ctx.config.seed);
  write_manifest(manifest, manifest_path(ctx.run_dir));
  return manifest;
}

namespace {

void assemble_synthesis_outputs(const RunContext& ctx, const CorpusManifest& manifest) {
  auto by_assignment = manifest.submissions_by_assignment();
  fs::path desc_dir = ctx.run_dir / "synthetic" / "desc";
  fs::path sub_dir = ctx.run_dir / "synthetic" / "sub";

  std::string descriptions;
  std::string pairs;
  for (Method method : sorted_methods(ctx.config)) {
    for (const auto& assignment : manifest.assignments) {
      fs::path path = item_file(desc_dir, item_name(method, assignment.assignment_id));
      if (!fs::exists(path)) continue;  // permanently failed item
      json entry = load_json_file(path);
      descriptions += entry.dump();
      descriptions += '\n';
      for (const auto& sub_id : by_assignment[assignment.assignment_id]) {
        fs::path sub_path = item_file(sub_dir, item_name(method, sub_id));
        if (!fs::exists(sub_path)) continue;
        pairs += load_json_file(sub_path).dump();
        pairs += '\n';
      }
    }
  }
  atomic_write_file(ctx.run_dir / "descriptions.jsonl", descriptions);
  atomic_write_file(ctx.run_dir / "pairs.jsonl", pairs);
}

}  // namespace

StageStats run_synthesize(const RunContext& ctx, const SynthesizeOptions& options) {
  CorpusManifest manifest = read_manifest(manifest_path(ctx.run_dir));
  ensure_config_snapshot(ctx.run_dir, canonical_config_json(ctx.config));
  RunLedger ledger(ctx.run_dir);
  Gateway gateway = make_gateway(ctx);
  PromptLibrary prompts = load_prompts(ctx.config);
  const SynthesisSection& cfg = ctx.config.synthesis;

  fs::path desc_dir = ctx.run_dir / "synthetic" / "desc";
  fs::path sub_dir = ctx.run_dir / "synthetic" / "sub";
  fs::create_directories(desc_dir);
  fs::create_directories(sub_dir);

  auto by_assignment = manifest.submissions_by_assignment();
  std::vector<WorkItem> all_items;
  for (Method method : sorted_methods(ctx.config)) {
    for (const auto& assignment : manifest.assignments) {
      all_items.push_back({kStageDesc, item_name(method, assignment.assignment_id)});
      for (const auto& sub_id : by_assignment[assignment.assignment_id])
        all_items.push_back({kStageSub, item_name(method, sub_id)});
    }
  }
  ResumePlan plan = plan_resume(ledger, all_items);

  StageStats stats;
  stats.skipped = plan.done.size();
  stats.permanent_failed = plan.permanent_failed.size();

  std::set<std::pair<std::string, std::string>> todo;
  for (const auto& work : plan.todo) todo.insert({work.stage, work.item});

  std::atomic<int> completed{0};
  std::atomic<std::size_t> failed{0};
  auto should_abort = [&] {
    return options.abort_after > 0 && completed.load() >= options.abort_after;
  };

  {
    TaskPool pool(cfg.parallelism);
    for (Method method : sorted_methods(ctx.config)) {
      for (const auto& assignment : manifest.assignments) {
        const AssignmentRecord* record = &assignment;
        pool.submit([&, method, record] {
          const std::string desc_item = item_name(method, record->assignment_id);
          bool desc_ready = ledger.is_done(kStageDesc, desc_item);
          std::string synthetic_description;
          if (desc_ready) {
            synthetic_description =
                load_json_file(item_file(desc_dir, desc_item)).at("synthetic_text");
          } else if (todo.count({kStageDesc, desc_item}) && !should_abort()) {
            ledger.record_started(kStageDesc, desc_item);
            try {
              MimicryTask task;
              task.kind = ArtifactKind::description;
              task.real_description = record->description_text;
              task.method = method;
              task.prompt_protection = method == Method::sam && cfg.prompt_protection;
              SynthesisOptions sopts;
              sopts.extraction_retries = cfg.extraction_retries;
              sopts.source_id = record->assignment_id;
              SyntheticPair pair = synthesize(task, cfg.description_model, gateway, prompts, sopts);
              if (!pair.extraction_ok)
                throw ExtractionFailure("no synthetic block after " +
                                        std::to_string(pair.attempts) + " attempts");
              json entry{{"assignment_id", record->assignment_id},
                         {"method", std::string(method_name(method))},
                         {"synthetic_text", pair.synthetic_text},
                         {"attempts", pair.attempts},
                         {"extraction_ok", pair.extraction_ok},
                         {"generator", model_spec_label(pair.generator)}};
              fs::path path = item_file(desc_dir, desc_item);
              write_json_file(path, entry);
              ledger.record_done(kStageDesc, desc_item,
                                 fs::relative(path, ctx.run_dir).string());
              synthetic_description = pair.synthetic_text;
              desc_ready = true;
              ++completed;
            } catch (const Error& e) {
              ledger.record_failed(kStageDesc, desc_item, failure_reason(e));
              ++failed;
            }
          }
          if (!desc_ready) {
            // A parked description can never unblock its submissions, so they
            // collect blocked failures until they park as well; a description
            // that merely failed this run leaves them pending for the resume.
            if (!todo.count({kStageDesc, desc_item})) {
              for (const auto& sub_id : by_assignment.at(record->assignment_id)) {
                const std::string sub_item = item_name(method, sub_id);
                if (!todo.count({kStageSub, sub_item})) continue;
                ledger.record_failed(kStageSub, sub_item,
                                     "blocked: description permanently failed");
                ++failed;
              }
            }
            return;
          }
          for (const auto& sub_id : by_assignment.at(record->assignment_id)) {
            if (should_abort()) return;
            const std::string sub_item = item_name(method, sub_id);
            if (!todo.count({kStageSub, sub_item})) continue;
            const SubmissionRecord* sub = manifest.find_submission(sub_id);
            ledger.record_started(kStageSub, sub_item);
            try {
              MimicryTask task;
              task.kind = ArtifactKind::submission;
              task.real_description = record->description_text;
              task.synthetic_description = synthetic_description;
              task.real_submission = sub->submission_text;
              task.real_submission_word_count = sub->word_count;
              task.method = method;
              task.prompt_protection = method == Method::sam && cfg.prompt_protection;
              GateOptions gopts;
              gopts.gate_protection = method == Method::sam && cfg.gate_protection;
              gopts.max_regen = cfg.max_regen;
              gopts.synthesis.extraction_retries = cfg.extraction_retries;
              gopts.synthesis.source_id = sub_id;
              GatedResult result = gated_synthesize(task, cfg.submission_model, cfg.judge_model,
                                                    gateway, prompts, gopts);
              json generations = json::array();
              for (const auto& attempt : result.history)
                generations.push_back({{"generation", attempt.generation},
                                       {"extraction_ok", attempt.extraction_ok},
                                       {"leak", attempt.leak}});
              json entry{{"assignment_id", record->assignment_id},
                         {"submission_id", sub_id},
                         {"method", std::string(method_name(method))},
                         {"synthetic_text", result.pair.synthetic_text},
                         {"attempts", result.pair.attempts},
                         {"extraction_ok", result.pair.extraction_ok},
                         {"published", result.published},
                         {"gated", result.gated},
                         {"generations", generations}};
              fs::path path = item_file(sub_dir, sub_item);
              write_json_file(path, entry);
              ledger.record_done(kStageSub, sub_item, fs::relative(path, ctx.run_dir).string());
              ++completed;
            } catch (const Error& e) {
              ledger.record_failed(kStageSub, sub_item, failure_reason(e));
              ++failed;
            }
          }
        });
      }
    }
    pool.wait_idle();
  }

  stats.completed = static_cast<std::size_t>(completed.load());
  stats.failed = failed.load();
  stats.aborted = should_abort();

  ResumePlan after = plan_resume(ledger, all_items);
  stats.permanent_failed = after.permanent_failed.size();
  if (after.todo.empty()) assemble_synthesis_outputs(ctx, manifest);
  return stats;
}

StageStats run_gate(const RunContext& ctx) {
  CorpusManifest manifest = read_manifest(manifest_path(ctx.run_dir));
  ensure_config_snapshot(ctx.run_dir, canonical_config_json(ctx.config));
  PairIndex pairs = load_pair_index(ctx.run_dir);
  RunLedger ledger(ctx.run_dir);
  Gateway gateway = make_gateway(ctx);
  PromptLibrary prompts = load_prompts(ctx.config);
  fs::path gate_dir = ctx.run_dir / "gate";
  fs::create_directories(gate_dir);

  std::vector<WorkItem> all_items;
  for (const auto& [method, rows] : pairs)
    for (const auto& [sub_id, row] : rows)
      if (row.published) all_items.push_back({kStageGate, method + ":" + sub_id});
  ResumePlan plan = plan_resume(ledger, all_items);

  StageStats stats;
  stats.skipped = plan.done.size();

  std::atomic<std::size_t> completed{0}, failed{0};
  {
    TaskPool pool(ctx.config.synthesis.parallelism);
    for (const auto& work : plan.todo) {
      pool.submit([&, work] {
        auto colon = work.item.find(':');
        std::string method = work.item.substr(0, colon);
        std::string sub_id = work.item.substr(colon + 1);
        const PairRow& row = pairs.at(method).at(sub_id);
        const SubmissionRecord* sub = manifest.find_submission(sub_id);
        ledger.record_started(work.stage, work.item);
        try {
          if (!sub) throw NotFound("submission " + sub_id + " missing from the manifest");
          Completion verdict = gateway.complete(
              ctx.config.synthesis.judge_model,
              build_judge_prompt(sub->submission_text, row.synthetic_text, prompts));
          bool leak = parse_verdict(verdict.text);
          fs::path path = item_file(gate_dir, work.item);
          write_json_file(path, json{{"method", method},
                                     {"submission_id", sub_id},
                                     {"leak", leak}});
          ledger.record_done(work.stage, work.item, fs::relative(path, ctx.run_dir).string());
          ++completed;
        } catch (const Error& e) {
          ledger.record_failed(work.stage, work.item, failure_reason(e));
          ++failed;
        }
      });
    }
    pool.wait_idle();
  }
  stats.completed = completed.load();
  stats.failed = failed.load();

  ResumePlan after = plan_resume(ledger, all_items);
  stats.permanent_failed = after.permanent_failed.size();
  if (!after.todo.empty()) return stats;

  json methods = json::object();
  for (const auto& [method, rows] : pairs) {
    std::size_t published = 0, clean = 0;
    for (const auto& [sub_id, row] : rows) {
      if (!row.published) continue;
      fs::path path = item_file(gate_dir, method + ":" + sub_id);
      if (!fs::exists(path)) continue;  // permanently failed verdict
      ++published;
      if (!load_json_file(path).at("leak").get<bool>()) ++clean;
    }
    if (published == 0) continue;
    methods[method] = {{"published", published},
                       {"clean", clean},
                       {"rate", protection_rate(clean, published)}};
  }
  write_json_file(ctx.run_dir / "eval" / "gate.json", json{{"methods", methods}});
  return stats;
}

StageStats run_grade(const RunContext& ctx) {
  CorpusManifest manifest = read_manifest(manifest_path(ctx.run_dir));
  ensure_config_snapshot(ctx.run_dir, canonical_config_json(ctx.config));
  PairIndex pairs = load_pair_index(ctx.run_dir);
  DescIndex descs = load_desc_index(ctx.run_dir);
  RunLedger ledger(ctx.run_dir);
  Gateway gateway = make_gateway(ctx);
  PromptLibrary prompts = load_prompts(ctx.config);
  fs::path grades_dir = ctx.run_dir / "grades";
  fs::create_directories(grades_dir);

  std::vector<std::string> sample = evaluation_sample(manifest, pairs, ctx.config);
  auto methods = sorted_methods(ctx.config);

  std::vector<WorkItem> all_items;
  for (const auto& sub_id : sample) all_items.push_back({kStageGrade, "real:" + sub_id});
  for (Method method : methods)
    for (const auto& sub_id : sample)
      all_items.push_back({kStageGrade, item_name(method, sub_id)});
  ResumePlan plan = plan_resume(ledger, all_items);

  StageStats stats;
  stats.skipped = plan.done.size();

  std::atomic<std::size_t> completed{0}, failed{0};
  {
    TaskPool pool(ctx.config.synthesis.parallelism);
    for (const auto& work : plan.todo) {
      pool.submit([&, work] {
        auto colon = work.item.find(':');
        std::string cohort = work.item.substr(0, colon);
        std::string sub_id = work.item.substr(colon + 1);
        const SubmissionRecord* sub = manifest.find_submission(sub_id);
        ledger.record_started(work.stage, work.item);
        try {
          if (!sub) throw NotFound("submission " + sub_id + " missing from the manifest");
          std::string description, submission;
          if (cohort == "real") {
            description = manifest.find_assignment(sub->assignment_id)->description_text;
            submission = sub->submission_text;
          } else {
            const PairRow& row = pairs.at(cohort).at(sub_id);
            description = descs.at(cohort).at(row.assignment_id);
            submission = row.synthetic_text;
          }
          PanelGrade grade = grade_panel(description, submission, ctx.config.grading.graders,
                                         gateway, prompts, ctx.config.grading.options);
          json marks = json::array();
          for (const auto& mark : grade.marks)
            marks.push_back(mark ? json(*mark) : json(nullptr));
          fs::path path = item_file(grades_dir, work.item);
          write_json_file(path, json{{"item", work.item},
                                     {"mean", grade.mean},
                                     {"marks", marks},
                                     {"degraded", grade.degraded}});
          ledger.record_done(work.stage, work.item, fs::relative(path, ctx.run_dir).string());
          ++completed;
        } catch (const Error& e) {
          ledger.record_failed(work.stage, work.item, failure_reason(e));
          ++failed;
        }
      });
    }
    pool.wait_idle();
  }
  stats.completed = completed.load();
  stats.failed = failed.load();
  ResumePlan after = plan_resume(ledger, all_items);
  stats.permanent_failed = after.permanent_failed.size();
  return stats;
}

void run_eval_resemblance(const RunContext& ctx) {
  CorpusManifest manifest = read_manifest(manifest_path(ctx.run_dir));
  ensure_config_snapshot(ctx.run_dir, canonical_config_json(ctx.config));
  PairIndex pairs = load_pair_index(ctx.run_dir);
  DescIndex descs = load_desc_index(ctx.run_dir);
  std::vector<std::string> sample = evaluation_sample(manifest, pairs, ctx.config);
  fs::path grades_dir = ctx.run_dir / "grades";

  std::vector<std::string> assignments;
  for (const auto& sub_id : sample) {
    const SubmissionRecord* sub = manifest.find_submission(sub_id);
    if (std::find(assignments.begin(), assignments.end(), sub->assignment_id) ==
        assignments.end())
      assignments.push_back(sub->assignment_id);
  }
  std::sort(assignments.begin(), assignments.end());

  auto grade_mean = [&](const std::string& item) -> double {
    fs::path path = item_file(grades_dir, item);
    if (!fs::exists(path))
      throw IncompleteInputs("missing grade for " + item + "; run grade first");
    return load_json_file(path).at("mean").get<double>();
  };

  HashEmbedder embedder(ctx.config.resemblance.embed_dim);
  json method_sections = json::object();
  json series = json::object();

  std::vector<double> real_lengths;
  std::vector<double> real_marks;
  for (const auto& sub_id : sample) {
    real_lengths.push_back(static_cast<double>(manifest.find_submission(sub_id)->word_count));
    real_marks.push_back(grade_mean("real:" + sub_id));
  }
  series["submission_lengths"]["real"] = real_lengths;
  series["submission_marks"]["real"] = real_marks;

  for (Method method : sorted_methods(ctx.config)) {
    std::string name(method_name(method));

    std::vector<double> desc_f1s, desc_real_len, desc_synth_len;
    for (const auto& assignment_id : assignments) {
      const AssignmentRecord* assignment = manifest.find_assignment(assignment_id);
      const std::string& synthetic = descs.at(name).at(assignment_id);
      desc_f1s.push_back(similarity(assignment->description_text, synthetic, embedder).f1);
      desc_real_len.push_back(static_cast<double>(assignment->word_count));
      desc_synth_len.push_back(static_cast<double>(word_count(synthetic)));
    }
    SimilaritySummary desc_summary = similarity_summary(desc_f1s);

    std::vector<double> sub_f1s, sub_synth_len, sub_synth_marks;
    for (const auto& sub_id : sample) {
      const SubmissionRecord* sub = manifest.find_submission(sub_id);
      const PairRow& row = pairs.at(name).at(sub_id);
      sub_f1s.push_back(similarity(sub->submission_text, row.synthetic_text, embedder).f1);
      sub_synth_len.push_back(static_cast<double>(word_count(row.synthetic_text)));
      sub_synth_marks.push_back(grade_mean(item_name(method, sub_id)));
    }
    SimilaritySummary sub_summary = similarity_summary(sub_f1s);

    method_sections[name] = {
        {"descriptions",
         {{"n", desc_f1s.size()},
          {"f1_mean", desc_summary.mean_f1},
          {"f1_std", desc_summary.std_f1},
          {"length_pcc", pcc(desc_real_len, desc_synth_len)},
          {"length_mae", mae(desc_real_len, desc_synth_len)}}},
        {"submissions",
         {{"n", sub_f1s.size()},
          {"f1_mean", sub_summary.mean_f1},
          {"f1_std", sub_summary.std_f1},
          {"length_pcc", pcc(real_lengths, sub_synth_len)},
          {"length_mae", mae(real_lengths, sub_synth_len)},
          {"marks_pcc", pcc(real_marks, sub_synth_marks)},
          {"marks_mae", mae(real_marks, sub_synth_marks)}}}};
    series["submission_lengths"][name] = sub_synth_len;
    series["submission_marks"][name] = sub_synth_marks;
  }

  json out{{"embedder", "hash-" + std::to_string(ctx.config.resemblance.embed_dim)},
           {"sample", sample},
           {"assignments", assignments},
           {"methods", method_sections},
           {"series", series}};
  write_json_file(ctx.run_dir / "eval" / "resemblance.json", out);
}

StageStats run_eval_utility(const RunContext& ctx) {
  CorpusManifest manifest = read_manifest(manifest_path(ctx.run_dir));
  ensure_config_snapshot(ctx.run_dir, canonical_config_json(ctx.config));
  PairIndex pairs = load_pair_index(ctx.run_dir);
  DescIndex descs = load_desc_index(ctx.run_dir);
  RunLedger ledger(ctx.run_dir);
  Gateway gateway = make_gateway(ctx);
  PromptLibrary prompts = load_prompts(ctx.config);
  const UtilitySection& cfg = ctx.config.utility;

  DimensionRegistry registry = cfg.registry_file.empty()
                                   ? DimensionRegistry::defaults()
                                   : DimensionRegistry::from_json_file(cfg.registry_file);

  std::string method(method_name(cfg.method));
  auto by_method = pairs.find(method);
  if (by_method == pairs.end())
    throw IncompleteInputs("no synthetic pairs for method '" + method + "'");

  std::map<std::string, std::vector<std::string>> pool;
  for (const auto& [assignment_id, sub_ids] : manifest.submissions_by_assignment()) {
    std::vector<std::string> eligible;
    for (const auto& sub_id : sub_ids) {
      auto row = by_method->second.find(sub_id);
      if (row != by_method->second.end() && row->second.published) eligible.push_back(sub_id);
    }
    if (!eligible.empty()) pool[assignment_id] = std::move(eligible);
  }

  const std::size_t m = cfg.feedback_models.size();
  const std::size_t k = cfg.per_model;

  fs::path records_dir = ctx.run_dir / "utility" / "records";
  fs::create_directories(records_dir);

  struct UtilityItem {
    std::string item;
    std::string model_label;
    std::size_t model_index;
    bool on_synthetic;
    std::string submission_id;
  };
  // Each model draws its own sample; overlap between models is expected,
  // repeats within one model are not.
  std::vector<UtilityItem> items;
  for (std::size_t i = 0; i < m; ++i) {
    std::string label = model_spec_label(cfg.feedback_models[i]);
    std::vector<std::string> sample =
        proportional_sample(pool, k, ctx.config.seed ^ fnv1a64("utility-sample:" + label));
    for (const char* cohort : {"real", "synthetic"}) {
      for (const auto& sub_id : sample) {
        items.push_back({label + ":" + cohort + ":" + sub_id, label, i,
                         std::string(cohort) == "synthetic", sub_id});
      }
    }
  }

  std::vector<WorkItem> all_items;
  for (const auto& entry : items) all_items.push_back({kStageUtility, entry.item});
  ResumePlan plan = plan_resume(ledger, all_items);

  StageStats stats;
  stats.skipped = plan.done.size();

  std::set<std::string> todo;
  for (const auto& work : plan.todo) todo.insert(work.item);

  std::atomic<std::size_t> completed{0}, failed{0};
  {
    TaskPool task_pool(cfg.parallelism);
    for (const auto& entry : items) {
      if (!todo.count(entry.item)) continue;
      task_pool.submit([&, entry] {
        ledger.record_started(kStageUtility, entry.item);
        try {
          const SubmissionRecord* sub = manifest.find_submission(entry.submission_id);
          std::string description, submission;
          if (entry.on_synthetic) {
            const PairRow& row = by_method->second.at(entry.submission_id);
            description = descs.at(method).at(row.assignment_id);
            submission = row.synthetic_text;
          } else {
            description = manifest.find_assignment(sub->assignment_id)->description_text;
            submission = sub->submission_text;
          }
          const ModelSpec& model = cfg.feedback_models[entry.model_index];
          std::string feedback = generate_feedback(description, submission, model, gateway, prompts);
          auto labels =
              label_feedback(description, submission, feedback, registry, cfg.labeler, gateway,
                             prompts);
          json label_obj = json::object();
          for (const auto& [dim, value] : labels) label_obj[dim] = value;
          fs::path path = item_file(records_dir, entry.item);
          write_json_file(path, json{{"submission_id", entry.submission_id},
                                     {"model", entry.model_label},
                                     {"cohort", entry.on_synthetic ? "synthetic" : "real"},
                                     {"feedback", feedback},
                                     {"labels", label_obj}});
          ledger.record_done(kStageUtility, entry.item, fs::relative(path, ctx.run_dir).string());
          ++completed;
        } catch (const Error& e) {
          ledger.record_failed(kStageUtility, entry.item, failure_reason(e));
          ++failed;
        }
      });
    }
    task_pool.wait_idle();
  }
  stats.completed = completed.load();
  stats.failed = failed.load();

  ResumePlan after = plan_resume(ledger, all_items);
  stats.permanent_failed = after.permanent_failed.size();
  if (!after.todo.empty()) return stats;

  // Every expected record is now either done or permanently failed.
  std::vector<FeedbackRecord> records;
  std::string labels_jsonl;
  json failures = json::array();
  std::map<std::string, std::string> last_failure;
  for (const auto& record : ledger.records())
    if (record.stage == kStageUtility && record.status == "failed")
      last_failure[record.item] = record.detail;
  for (const auto& entry : items) {
    fs::path path = item_file(records_dir, entry.item);
    if (!ledger.is_done(kStageUtility, entry.item)) {
      failures.push_back({{"item", entry.item}, {"reason", last_failure[entry.item]}});
      continue;
    }
    json stored = load_json_file(path);
    FeedbackRecord record;
    record.submission_id = entry.submission_id;
    record.feedback_model = entry.model_label;
    record.on_synthetic = entry.on_synthetic;
    record.feedback_text = stored.at("feedback").get<std::string>();
    for (const auto& [dim, value] : stored.at("labels").items())
      record.labels[dim] = value.get<int>();
    labels_jsonl += json{{"model", entry.model_label},
                         {"cohort", entry.on_synthetic ? "synthetic" : "real"},
                         {"submission_id", entry.submission_id},
                         {"labels", stored.at("labels")}}
                        .dump();
    labels_jsonl += '\n';
    records.push_back(std::move(record));
  }
  atomic_write_file(ctx.run_dir / "utility" / "labels.jsonl", labels_jsonl);

  std::vector<FeedbackRecord> real_records, synthetic_records;
  for (const auto& record : records)
    (record.on_synthetic ? synthetic_records : real_records).push_back(record);

  auto summaries_json = [&](const std::vector<FeedbackRecord>& cohort_records,
                            const char* cohort) {
    json rows = json::array();
    for (const auto& summary : aspect_summaries(cohort_records, registry))
      rows.push_back({{"aspect", summary.aspect},
                      {"cohort", cohort},
                      {"mean", summary.mean},
                      {"std", summary.std_dev},
                      {"n", summary.count}});
    return rows;
  };
  json aspect_rows = json::array();
  for (const auto& row : summaries_json(real_records, "real")) aspect_rows.push_back(row);
  for (const auto& row : summaries_json(synthetic_records, "synthetic")) aspect_rows.push_back(row);

  std::string csv = "aspect,cohort,mean,std,n\n";
  for (const auto& row : aspect_rows) {
    csv += row.at("aspect").get<std::string>() + "," + row.at("cohort").get<std::string>() + "," +
           format_fixed(row.at("mean").get<double>(), 4) + "," +
           format_fixed(row.at("std").get<double>(), 4) + "," +
           std::to_string(row.at("n").get<std::size_t>()) + "\n";
  }
  atomic_write_file(ctx.run_dir / "utility" / "aspect_summary.csv", csv);

  json significance = json::array();
  for (const auto& aspect : registry.aspects()) {
    std::vector<double> real_scores, synthetic_scores;
    for (const auto& record : real_records)
      real_scores.push_back(record_aspect_score(record.labels, registry, aspect));
    for (const auto& record : synthetic_records)
      synthetic_scores.push_back(record_aspect_score(record.labels, registry, aspect));
    json entry{{"aspect", aspect}};
    try {
      WelchResult welch = welch_t_test(real_scores, synthetic_scores);
      entry["t"] = welch.t;
      entry["df"] = welch.df;
      entry["p"] = welch.p_two_sided;
      entry["real_mean"] = mean_of(real_scores);
      entry["synthetic_mean"] = mean_of(synthetic_scores);
    } catch (const DegenerateSeries& e) {
      entry["error"] = e.what();
    }
    significance.push_back(entry);
  }

  write_json_file(ctx.run_dir / "eval" / "utility.json",
                  json{{"expected", 2 * m * k},
                       {"records", records.size()},
                       {"failures", failures},
                       {"method", method},
                       {"aspects", aspect_rows},
                       {"significance", significance}});
  return stats;
}

void run_ablate_privacy(const RunContext& ctx) {
  CorpusManifest manifest = read_manifest(manifest_path(ctx.run_dir));
  ensure_config_snapshot(ctx.run_dir, canonical_config_json(ctx.config));
  DescIndex descs = load_desc_index(ctx.run_dir);
  RunLedger ledger(ctx.run_dir);
  if (ledger.is_done(kStageAblation, "all")) return;
  Gateway gateway = make_gateway(ctx);
  PromptLibrary prompts = load_prompts(ctx.config);

  auto sam_descs = descs.find(std::string(method_name(Method::sam)));
  if (sam_descs == descs.end())
    throw IncompleteInputs("ablation needs mimicry descriptions; run synthesize first");

  std::vector<MimicryTask> tasks;
  auto by_assignment = manifest.submissions_by_assignment();
  for (const auto& assignment : manifest.assignments) {
    auto desc = sam_descs->second.find(assignment.assignment_id);
    if (desc == sam_descs->second.end()) continue;
    for (const auto& sub_id : by_assignment[assignment.assignment_id]) {
      const SubmissionRecord* sub = manifest.find_submission(sub_id);
      MimicryTask task;
      task.kind = ArtifactKind::submission;
      task.real_description = assignment.description_text;
      task.synthetic_description = desc->second;
      task.real_submission = sub->submission_text;
      task.real_submission_word_count = sub->word_count;
      tasks.push_back(std::move(task));
    }
  }

  ledger.record_started(kStageAblation, "all");
  try {
    AblationOptions options;
    options.max_regen = ctx.config.synthesis.max_regen;
    options.synthesis.extraction_retries = ctx.config.synthesis.extraction_retries;
    std::vector<AblationCell> cells =
        run_ablation(tasks, ctx.config.synthesis.submission_model,
                     ctx.config.synthesis.judge_model, gateway, prompts, options);
    json rows = json::array();
    for (const auto& cell : cells)
      rows.push_back({{"method", std::string(method_name(cell.method))},
                      {"prompt_protection", cell.prompt_protection},
                      {"gate_protection", cell.gate_protection},
                      {"published", cell.published},
                      {"clean", cell.clean},
                      {"rate", cell.rate}});
    fs::path path = ctx.run_dir / "eval" / "ablation.json";
    write_json_file(path, json{{"tasks", tasks.size()}, {"cells", rows}});
    ledger.record_done(kStageAblation, "all", fs::relative(path, ctx.run_dir).string());
  } catch (const Error& e) {
    ledger.record_failed(kStageAblation, "all", failure_reason(e));
    throw;
  }
}

namespace {

struct MatrixRowStats {
  std::string label;
  std::size_t n = 0;
  SimilaritySummary f1;
  double length_pcc = 0.0;
  double length_mae = 0.0;
  std::optional<double> marks_pcc;
  std::optional<double> marks_mae;
};

json matrix_row_json(const MatrixRowStats& row) {
  json out{{"model", row.label},
           {"n", row.n},
           {"f1_mean", row.f1.mean_f1},
           {"f1_std", row.f1.std_f1},
           {"length_pcc", row.length_pcc},
           {"length_mae", row.length_mae}};
  if (row.marks_pcc) out["marks_pcc"] = *row.marks_pcc;
  if (row.marks_mae) out["marks_mae"] = *row.marks_mae;
  return out;
}

}  // namespace

StageStats run_matrix(const RunContext& ctx) {
  CorpusManifest manifest = read_manifest(manifest_path(ctx.run_dir));
  ensure_config_snapshot(ctx.run_dir, canonical_config_json(ctx.config));
  RunLedger ledger(ctx.run_dir);
  Gateway gateway = make_gateway(ctx);
  PromptLibrary prompts = load_prompts(ctx.config);
  const MatrixSection& cfg = ctx.config.matrix;
  if (cfg.description_candidates.empty() || cfg.submission_candidates.empty())
    throw ConfigError("config: matrix needs at least one candidate per role");

  auto pool = manifest.submissions_by_assignment();
  std::vector<std::string> sample;
  if (cfg.sample == 0) {
    for (const auto& [assignment_id, sub_ids] : pool)
      sample.insert(sample.end(), sub_ids.begin(), sub_ids.end());
  } else {
    sample = proportional_sample(pool, cfg.sample, ctx.config.seed);
  }
  std::sort(sample.begin(), sample.end());
  if (sample.empty()) throw IncompleteInputs("empty corpus; run ingest first");

  std::vector<std::string> assignments;
  for (const auto& sub_id : sample) {
    const std::string& assignment_id = manifest.find_submission(sub_id)->assignment_id;
    if (std::find(assignments.begin(), assignments.end(), assignment_id) == assignments.end())
      assignments.push_back(assignment_id);
  }
  std::sort(assignments.begin(), assignments.end());

  fs::path matrix_dir = ctx.run_dir / "matrix";
  StageStats stats;
  std::atomic<std::size_t> completed{0}, skipped{0}, failed{0};
  HashEmbedder embedder(ctx.config.resemblance.embed_dim);

  // --- description candidates ---
  auto run_desc_candidate = [&](const ModelSpec& candidate) {
    std::string label = model_spec_label(candidate);
    fs::path out_dir = matrix_dir / "desc" / sanitize_item(label);
    fs::create_directories(out_dir);
    for (const auto& assignment_id : assignments) {
      std::string item = label + ":" + assignment_id;
      if (ledger.is_done(kStageMatrixDesc, item)) {
        ++skipped;
        continue;
      }
      if (ledger.failure_count(kStageMatrixDesc, item) > kMaxItemRetries) continue;
      ledger.record_started(kStageMatrixDesc, item);
      try {
        MimicryTask task;
        task.kind = ArtifactKind::description;
        task.real_description = manifest.find_assignment(assignment_id)->description_text;
        task.method = Method::sam;
        task.prompt_protection = true;
        SynthesisOptions sopts;
        sopts.extraction_retries = ctx.config.synthesis.extraction_retries;
        sopts.source_id = assignment_id;
        SyntheticPair pair = synthesize(task, candidate, gateway, prompts, sopts);
        if (!pair.extraction_ok)
          throw ExtractionFailure("no synthetic block after " + std::to_string(pair.attempts) +
                                  " attempts");
        fs::path path = item_file(out_dir, item);
        write_json_file(path, json{{"assignment_id", assignment_id},
                                   {"model", label},
                                   {"synthetic_text", pair.synthetic_text}});
        ledger.record_done(kStageMatrixDesc, item, fs::relative(path, ctx.run_dir).string());
        ++completed;
      } catch (const Error& e) {
        ledger.record_failed(kStageMatrixDesc, item, failure_reason(e));
        ++failed;
      }
    }
  };
  if (cfg.parallel_cells) {
    std::vector<std::future<void>> futures;
    for (const auto& candidate : cfg.description_candidates)
      futures.push_back(std::async(std::launch::async, run_desc_candidate, candidate));
    for (auto& future : futures) future.get();
  } else {
    for (const auto& candidate : cfg.description_candidates) run_desc_candidate(candidate);
  }

  auto desc_text = [&](const std::string& label,
                       const std::string& assignment_id) -> std::optional<std::string> {
    fs::path path =
        item_file(matrix_dir / "desc" / sanitize_item(label), label + ":" + assignment_id);
    if (!fs::exists(path)) return std::nullopt;
    return load_json_file(path).at("synthetic_text").get<std::string>();
  };

  std::vector<MatrixRowStats> desc_rows;
  for (const auto& candidate : cfg.description_candidates) {
    MatrixRowStats row;
    row.label = model_spec_label(candidate);
    std::vector<double> f1s, real_len, synth_len;
    for (const auto& assignment_id : assignments) {
      auto synthetic = desc_text(row.label, assignment_id);
      if (!synthetic) continue;
      const AssignmentRecord* assignment = manifest.find_assignment(assignment_id);
      f1s.push_back(similarity(assignment->description_text, *synthetic, embedder).f1);
      real_len.push_back(static_cast<double>(assignment->word_count));
      synth_len.push_back(static_cast<double>(word_count(*synthetic)));
    }
    if (f1s.empty())
      throw IncompleteInputs("description candidate " + row.label + " produced nothing");
    row.n = f1s.size();
    row.f1 = similarity_summary(f1s);
    row.length_pcc = pcc(real_len, synth_len);
    row.length_mae = mae(real_len, synth_len);
    desc_rows.push_back(std::move(row));
  }

  // Pick the generator whose descriptions track real lengths best; they serve
  // as the fixed context while submission candidates vary.
  std::string chosen;
  if (!cfg.fixed_description_model.empty()) {
    for (const auto& row : desc_rows)
      if (row.label == cfg.fixed_description_model) chosen = row.label;
    if (chosen.empty())
      throw ConfigError("config: fixed_description_model '" + cfg.fixed_description_model +
                        "' is not a description candidate");
  } else {
    const MatrixRowStats* best = nullptr;
    for (const auto& row : desc_rows) {
      if (!best || row.length_pcc > best->length_pcc ||
          (row.length_pcc == best->length_pcc && row.length_mae < best->length_mae))
        best = &row;
    }
    chosen = best->label;
  }

  // --- submission candidates ---
  auto run_sub_candidate = [&](const ModelSpec& candidate) {
    std::string label = model_spec_label(candidate);
    fs::path out_dir = matrix_dir / "sub" / sanitize_item(label);
    fs::create_directories(out_dir);
    for (const auto& sub_id : sample) {
      std::string item = label + ":" + sub_id;
      if (ledger.is_done(kStageMatrixSub, item)) {
        ++skipped;
        continue;
      }
      if (ledger.failure_count(kStageMatrixSub, item) > kMaxItemRetries) continue;
      const SubmissionRecord* sub = manifest.find_submission(sub_id);
      ledger.record_started(kStageMatrixSub, item);
      try {
        auto synthetic_description = desc_text(chosen, sub->assignment_id);
        if (!synthetic_description)
          throw IncompleteInputs("no synthetic description for " + sub->assignment_id);
        MimicryTask task;
        task.kind = ArtifactKind::submission;
        task.real_description = manifest.find_assignment(sub->assignment_id)->description_text;
        task.synthetic_description = *synthetic_description;
        task.real_submission = sub->submission_text;
        task.real_submission_word_count = sub->word_count;
        task.method = Method::sam;
        task.prompt_protection = true;
        GateOptions gopts;
        gopts.gate_protection = true;
        gopts.max_regen = ctx.config.synthesis.max_regen;
        gopts.synthesis.extraction_retries = ctx.config.synthesis.extraction_retries;
        gopts.synthesis.source_id = sub_id;
        GatedResult result = gated_synthesize(task, candidate, ctx.config.synthesis.judge_model,
                                              gateway, prompts, gopts);
        fs::path path = item_file(out_dir, item);
        write_json_file(path, json{{"submission_id", sub_id},
                                   {"assignment_id", sub->assignment_id},
                                   {"model", label},
                                   {"synthetic_text", result.pair.synthetic_text},
                                   {"published", result.published}});
        ledger.record_done(kStageMatrixSub, item, fs::relative(path, ctx.run_dir).string());
        ++completed;
      } catch (const Error& e) {
        ledger.record_failed(kStageMatrixSub, item, failure_reason(e));
        ++failed;
      }
    }
  };
  if (cfg.parallel_cells) {
    std::vector<std::future<void>> futures;
    for (const auto& candidate : cfg.submission_candidates)
      futures.push_back(std::async(std::launch::async, run_sub_candidate, candidate));
    for (auto& future : futures) future.get();
  } else {
    for (const auto& candidate : cfg.submission_candidates) run_sub_candidate(candidate);
  }

  // --- grading ---
  fs::path grades_dir = matrix_dir / "grades";
  fs::create_directories(grades_dir);
  auto grade_item = [&](const std::string& item, const std::string& description,
                        const std::string& submission) -> bool {
    if (ledger.is_done(kStageMatrixGrade, item)) {
      ++skipped;
      return true;
    }
    if (ledger.failure_count(kStageMatrixGrade, item) > kMaxItemRetries) return false;
    ledger.record_started(kStageMatrixGrade, item);
    try {
      PanelGrade grade = grade_panel(description, submission, ctx.config.grading.graders, gateway,
                                     prompts, ctx.config.grading.options);
      fs::path path = item_file(grades_dir, item);
      write_json_file(path, json{{"item", item}, {"mean", grade.mean}});
      ledger.record_done(kStageMatrixGrade, item, fs::relative(path, ctx.run_dir).string());
      ++completed;
      return true;
    } catch (const Error& e) {
      ledger.record_failed(kStageMatrixGrade, item, failure_reason(e));
      ++failed;
      return false;
    }
  };

  for (const auto& sub_id : sample) {
    const SubmissionRecord* sub = manifest.find_submission(sub_id);
    grade_item("real:" + sub_id, manifest.find_assignment(sub->assignment_id)->description_text,
               sub->submission_text);
  }

  auto grade_mean = [&](const std::string& item) -> std::optional<double> {
    fs::path path = item_file(grades_dir, item);
    if (!fs::exists(path)) return std::nullopt;
    return load_json_file(path).at("mean").get<double>();
  };

  std::vector<MatrixRowStats> sub_rows;
  for (const auto& candidate : cfg.submission_candidates) {
    MatrixRowStats row;
    row.label = model_spec_label(candidate);
    std::vector<double> f1s, real_len, synth_len, real_marks, synth_marks;
    for (const auto& sub_id : sample) {
      fs::path path =
          item_file(matrix_dir / "sub" / sanitize_item(row.label), row.label + ":" + sub_id);
      if (!fs::exists(path)) continue;
      json stored = load_json_file(path);
      if (!stored.at("published").get<bool>()) continue;
      const SubmissionRecord* sub = manifest.find_submission(sub_id);
      std::string synthetic = stored.at("synthetic_text").get<std::string>();
      auto synthetic_description = desc_text(chosen, sub->assignment_id);
      if (!grade_item(row.label + ":" + sub_id,
                      synthetic_description ? *synthetic_description : std::string(), synthetic))
        continue;
      auto real_mark = grade_mean("real:" + sub_id);
      auto synth_mark = grade_mean(row.label + ":" + sub_id);
      if (!real_mark || !synth_mark) continue;
      f1s.push_back(similarity(sub->submission_text, synthetic, embedder).f1);
      real_len.push_back(static_cast<double>(sub->word_count));
      synth_len.push_back(static_cast<double>(word_count(synthetic)));
      real_marks.push_back(*real_mark);
      synth_marks.push_back(*synth_mark);
    }
    if (f1s.empty())
      throw IncompleteInputs("submission candidate " + row.label + " produced nothing");
    row.n = f1s.size();
    row.f1 = similarity_summary(f1s);
    row.length_pcc = pcc(real_len, synth_len);
    row.length_mae = mae(real_len, synth_len);
    row.marks_pcc = pcc(real_marks, synth_marks);
    row.marks_mae = mae(real_marks, synth_marks);
    sub_rows.push_back(std::move(row));
  }

  json desc_rows_json = json::array(), sub_rows_json = json::array();
  for (const auto& row : desc_rows) desc_rows_json.push_back(matrix_row_json(row));
  for (const auto& row : sub_rows) sub_rows_json.push_back(matrix_row_json(row));
  write_json_file(ctx.run_dir / "eval" / "matrix.json",
                  json{{"sample", sample},
                       {"assignments", assignments},
                       {"chosen_description_model", chosen},
                       {"description_rows", desc_rows_json},
                       {"submission_rows", sub_rows_json}});

  stats.completed = completed.load();
  stats.skipped = skipped.load();
  stats.failed = failed.load();
  return stats;
}

namespace {

ResemblanceRow row_from_json(const std::string& label, const json& section, bool with_marks) {
  ResemblanceRow row;
  row.label = label;
  row.f1.mean_f1 = section.at("f1_mean").get<double>();
  row.f1.std_f1 = section.at("f1_std").get<double>();
  row.f1.count = section.at("n").get<std::size_t>();
  row.length_pcc = section.at("length_pcc").get<double>();
  row.length_mae = section.at("length_mae").get<double>();
  if (with_marks) {
    row.marks_pcc = section.at("marks_pcc").get<double>();
    row.marks_mae = section.at("marks_mae").get<double>();
  }
  return row;
}

std::string method_row_label(const std::string& method) {
  if (method == "naive") return "by Naive mimicry";
  if (method == "sam") return "by SAM";
  return "by " + method;
}

}  // namespace

void run_report(const RunContext& ctx) {
  ensure_config_snapshot(ctx.run_dir, canonical_config_json(ctx.config));
  fs::path eval_dir = ctx.run_dir / "eval";
  fs::path report_dir = ctx.run_dir / "report";
  if (!fs::exists(eval_dir / "resemblance.json"))
    throw IncompleteInputs("no resemblance results; run eval-resemblance first");
  fs::create_directories(report_dir);

  json resemblance = load_json_file(eval_dir / "resemblance.json");
  std::vector<ResemblanceRow> desc_rows, sub_rows;
  std::vector<std::string> method_order;
  for (const char* preferred : {"naive", "sam"})
    if (resemblance.at("methods").contains(preferred)) method_order.push_back(preferred);
  for (const auto& [method, section] : resemblance.at("methods").items())
    if (std::find(method_order.begin(), method_order.end(), method) == method_order.end())
      method_order.push_back(method);
  for (const auto& method : method_order) {
    const json& section = resemblance.at("methods").at(method);
    desc_rows.push_back(
        row_from_json(method_row_label(method), section.at("descriptions"), false));
    sub_rows.push_back(row_from_json(method_row_label(method), section.at("submissions"), true));
  }
  atomic_write_file(report_dir / "table1.csv", render_resemblance_csv(desc_rows, sub_rows));

  auto series_for = [&](const char* key) {
    std::vector<PlotSeries> series;
    const json& block = resemblance.at("series").at(key);
    series.push_back({"Real", block.at("real").get<std::vector<double>>()});
    for (const char* method : {"sam", "naive"})
      if (block.contains(method))
        series.push_back({method == std::string("sam") ? "SAM" : "Naive",
                          block.at(method).get<std::vector<double>>()});
    return series;
  };
  auto lengths = series_for("submission_lengths");
  atomic_write_file(report_dir / "submission_length_violin.svg",
                    render_violin_svg("Submission lengths", "words", lengths));
  atomic_write_file(report_dir / "submission_length_violin.json",
                    render_series_sidecar_json(lengths));
  auto marks = series_for("submission_marks");
  atomic_write_file(report_dir / "submission_marks_violin.svg",
                    render_violin_svg("Submission marks", "mark", marks));
  atomic_write_file(report_dir / "submission_marks_violin.json",
                    render_series_sidecar_json(marks));

  if (fs::exists(eval_dir / "ablation.json")) {
    json ablation = load_json_file(eval_dir / "ablation.json");
    std::vector<AblationCell> cells;
    for (const auto& row : ablation.at("cells")) {
      AblationCell cell;
      cell.method = parse_method(row.at("method").get<std::string>());
      cell.prompt_protection = row.at("prompt_protection").get<bool>();
      cell.gate_protection = row.at("gate_protection").get<bool>();
      cell.published = row.at("published").get<std::size_t>();
      cell.clean = row.at("clean").get<std::size_t>();
      cell.rate = row.at("rate").get<double>();
      cells.push_back(cell);
    }
    atomic_write_file(report_dir / "table2.csv", render_ablation_csv(cells));
  }

  if (fs::exists(eval_dir / "matrix.json")) {
    json matrix = load_json_file(eval_dir / "matrix.json");
    std::vector<ResemblanceRow> matrix_desc, matrix_sub;
    for (const auto& row : matrix.at("description_rows"))
      matrix_desc.push_back(row_from_json(row.at("model").get<std::string>(), row, false));
    for (const auto& row : matrix.at("submission_rows"))
      matrix_sub.push_back(row_from_json(row.at("model").get<std::string>(), row, true));
    atomic_write_file(report_dir / "table3.csv",
                      render_resemblance_csv(matrix_desc, matrix_sub));
    atomic_write_file(report_dir / "table3_best.json",
                      render_best_flags_json(matrix_desc, matrix_sub));
  }

  if (fs::exists(eval_dir / "utility.json")) {
    json utility = load_json_file(eval_dir / "utility.json");
    std::vector<AspectBar> bars;
    for (const auto& row : utility.at("aspects"))
      bars.push_back({row.at("aspect").get<std::string>(), row.at("cohort").get<std::string>(),
                      row.at("mean").get<double>(), row.at("std").get<double>(),
                      row.at("n").get<std::size_t>()});
    atomic_write_file(report_dir / "utility_aspects.svg",
                      render_aspect_bar_svg("Feedback quality by aspect", bars));
    atomic_write_file(report_dir / "utility_aspects.json", render_aspect_sidecar_json(bars));
  }
}

}  // namespace samkit
