#include "samkit/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "samkit/errors.hpp"
#include "samkit/runstore.hpp"
#include "samkit/util.hpp"
#include "test_support.hpp"

using namespace samkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << content;
}

// Two assignments with varied lengths so no metric series degenerates.
void build_corpus(const fs::path& root) {
  write_text(root / "cs1/hw1/description.txt",
             "Design a stack machine with push, pop and arithmetic words. The interpreter "
             "must reject underflow and report each error with a line number.\n"
             "Rubric: correctness 60, error handling 25, style 15.");
  write_text(root / "cs1/hw1/submissions/alice.txt",
             "My interpreter keeps a vector of integers and dispatches on each token. "
             "Underflow raises a checked error that carries the line number forward.");
  write_text(root / "cs1/hw1/submissions/bob.txt",
             "I parse tokens one at a time and push numbers onto a list. Arithmetic pops "
             "two values; an empty list prints an error and stops the whole program run.");
  write_text(root / "cs1/hw1/submissions/carol.txt",
             "The machine is a loop over instructions with a switch per opcode.");
  write_text(root / "cs1/hw2/description.txt",
             "Write a short essay comparing recursive descent parsing with table driven "
             "parsing. Cover lookahead, error recovery and grammar restrictions, and close "
             "with a recommendation for a small language project of your own choosing.\n"
             "Rubric: clarity 50, technical depth 50.");
  write_text(root / "cs1/hw2/submissions/dan.txt",
             "Recursive descent mirrors the grammar directly, one function per rule, which "
             "makes error messages easy to shape. Table driven parsers win once the grammar "
             "grows, because the table generator checks conflicts mechanically.");
  write_text(root / "cs1/hw2/submissions/erin.txt",
             "Both styles read tokens left to right. I prefer tables for big grammars.");
}

RunConfig small_config() {
  RunConfig config = default_run_config();
  config.synthesis.parallelism = 2;
  config.utility.feedback_models = {parse_model_spec("m-alpha"), parse_model_spec("m-beta"),
                                    parse_model_spec("m-gamma")};
  config.utility.per_model = 2;
  config.utility.parallelism = 2;
  config.matrix.description_candidates = {parse_model_spec("cand-a"),
                                          parse_model_spec("cand-b:high")};
  config.matrix.submission_candidates = {parse_model_spec("cand-c"),
                                         parse_model_spec("cand-d:high")};
  config.matrix.sample = 0;
  return config;
}

struct Fixture {
  TempDir dir;
  fs::path corpus;
  RunContext ctx;

  Fixture() {
    corpus = dir.path() / "corpus";
    build_corpus(corpus);
    ctx.run_dir = dir.path() / "run";
    ctx.mode = GatewayMode::record;
    ctx.config = small_config();
    ctx.config.corpus.root = corpus;
  }

  void synthesize_all() {
    run_ingest(ctx);
    run_synthesize(ctx);
  }
};

// Fails every call for one model id, succeeds like the mock otherwise.
class BrokenModelProvider : public Provider {
 public:
  explicit BrokenModelProvider(std::string broken_model)
      : broken_model_(std::move(broken_model)) {}
  Completion complete(const ModelSpec& spec, const std::vector<Message>& messages) override {
    if (spec.model_id == broken_model_) throw ProviderError("model offline: " + spec.model_id);
    return inner_.complete(spec, messages);
  }
  std::string name() const override { return "broken-model"; }

 private:
  std::string broken_model_;
  MockProvider inner_;
};

}  // namespace

TEST_CASE("config round trips through its canonical form") {
  RunConfig config = default_run_config();
  std::string canonical = canonical_config_json(config);
  CHECK(canonical == canonical_config_json(config));
  json parsed = json::parse(canonical);
  CHECK(parsed["seed"] == 7);
  CHECK(parsed["synthesis"]["methods"].size() == 2);
  // operational knobs must not enter the snapshot
  CHECK_FALSE(parsed["synthesis"].contains("parallelism"));
  CHECK_FALSE(parsed.contains("corpus"));
  CHECK_FALSE(parsed.contains("utility"));
  CHECK_FALSE(parsed.contains("matrix"));
}

TEST_CASE("config loader rejects unknown keys") {
  TempDir dir;
  write_text(dir.path() / "bad.json", "{\"sede\": 3}");
  CHECK_THROWS_AS(load_run_config(dir.path() / "bad.json"), ConfigError);
  write_text(dir.path() / "bad2.json", "{\"synthesis\": {\"judge\": \"x\"}}");
  CHECK_THROWS_AS(load_run_config(dir.path() / "bad2.json"), ConfigError);
  write_text(dir.path() / "bad3.json", "[1, 2]");
  CHECK_THROWS_AS(load_run_config(dir.path() / "bad3.json"), ConfigError);
}

TEST_CASE("config loader applies overrides over defaults") {
  TempDir dir;
  write_text(dir.path() / "cfg.json",
             "{\"seed\": 99, \"synthesis\": {\"judge_model\": \"judge-x:low\"},"
             " \"utility\": {\"models\": [\"a\", \"b:high\"], \"per_model\": 5},"
             " \"gateway\": {\"retry\": {\"max_retries\": 7}}}");
  RunConfig config = load_run_config(dir.path() / "cfg.json");
  CHECK(config.seed == 99);
  CHECK(config.synthesis.judge_model.model_id == "judge-x");
  CHECK(config.synthesis.judge_model.reasoning_effort == Effort::low);
  CHECK(config.utility.feedback_models.size() == 2);
  CHECK(config.utility.per_model == 5);
  CHECK(config.gateway.retry.max_retries == 7);
  // untouched sections keep their defaults
  CHECK(config.synthesis.max_regen == 5);
}

TEST_CASE("ingest builds a manifest from the corpus tree") {
  Fixture f;
  CorpusManifest manifest = run_ingest(f.ctx);
  CHECK(manifest.assignments.size() == 2);
  CHECK(manifest.submissions.size() == 5);
  CHECK(fs::exists(manifest_path(f.ctx.run_dir)));
  // snapshot exists and matches the resolved config
  CHECK(read_config_snapshot(f.ctx.run_dir) == canonical_config_json(f.ctx.config));
}

TEST_CASE("a changed seed on resume is refused") {
  Fixture f;
  run_ingest(f.ctx);
  RunContext drifted = f.ctx;
  drifted.config.seed = 1234;
  CHECK_THROWS_AS(run_synthesize(drifted), ConfigError);
}

TEST_CASE("synthesize covers every method and submission then assembles") {
  Fixture f;
  f.synthesize_all();
  StageStats stats = run_synthesize(f.ctx);  // second pass is a no-op
  CHECK(stats.completed == 0);
  CHECK(stats.skipped == 14);  // 2 methods * (2 descriptions + 5 submissions)

  auto pair_lines = json::array();
  std::istringstream pairs(read_file(f.ctx.run_dir / "pairs.jsonl"));
  std::string line;
  std::set<std::string> methods;
  std::size_t published = 0;
  while (std::getline(pairs, line)) {
    json row = json::parse(line);
    methods.insert(row["method"].get<std::string>());
    if (row["published"].get<bool>()) ++published;
    CHECK(row["synthetic_text"].get<std::string>().size() > 0);
  }
  CHECK(methods == std::set<std::string>{"naive", "sam"});
  CHECK(published == 10);

  std::istringstream descs(read_file(f.ctx.run_dir / "descriptions.jsonl"));
  std::size_t desc_count = 0;
  while (std::getline(descs, line)) ++desc_count;
  CHECK(desc_count == 4);
}

TEST_CASE("every description completes before its submissions start") {
  for (unsigned schedule = 0; schedule < 50; ++schedule) {
    TempDir dir;
    build_corpus(dir.path() / "corpus");
    RunContext ctx;
    ctx.run_dir = dir.path() / "run";
    ctx.mode = GatewayMode::record;
    ctx.config = small_config();
    ctx.config.corpus.root = dir.path() / "corpus";
    ctx.config.synthesis.parallelism = 4;

    auto mock = std::make_shared<MockProvider>();
    std::mt19937 rng(schedule);
    std::mutex rng_mutex;
    mock->call_hook = [&] {
      int us;
      {
        std::lock_guard<std::mutex> lock(rng_mutex);
        us = std::uniform_int_distribution<int>(0, 200)(rng);
      }
      std::this_thread::sleep_for(std::chrono::microseconds(us));
    };
    ctx.provider_override = mock;

    run_ingest(ctx);
    run_synthesize(ctx);

    RunLedger ledger(ctx.run_dir);
    std::map<std::string, std::int64_t> desc_done, sub_started;
    for (const auto& record : ledger.records()) {
      if (record.stage == "synthesize_description" && record.status == "done")
        desc_done[record.item] = record.seq;
      if (record.stage == "synthesize_submission" && record.status == "started" &&
          !sub_started.count(record.item))
        sub_started[record.item] = record.seq;
    }
    REQUIRE(desc_done.size() == 4);
    REQUIRE(sub_started.size() == 10);
    for (const auto& [item, seq] : sub_started) {
      auto colon = item.find(':');
      std::string method = item.substr(0, colon);
      std::string sub_id = item.substr(colon + 1);
      std::string assignment_id = sub_id.substr(0, sub_id.rfind('/'));
      auto done = desc_done.find(method + ":" + assignment_id);
      REQUIRE(done != desc_done.end());
      CHECK(done->second < seq);
    }
  }
}

TEST_CASE("an aborted stage resumes to the identical result") {
  Fixture full;
  full.synthesize_all();

  Fixture partial;
  partial.ctx.config.synthesis.parallelism = 1;
  run_ingest(partial.ctx);
  SynthesizeOptions abort_early;
  abort_early.abort_after = 3;
  StageStats first = run_synthesize(partial.ctx, abort_early);
  CHECK(first.aborted);
  CHECK(first.completed == 3);
  CHECK_FALSE(fs::exists(partial.ctx.run_dir / "pairs.jsonl"));

  StageStats second = run_synthesize(partial.ctx);
  CHECK_FALSE(second.aborted);
  CHECK(second.completed == 11);
  CHECK(read_file(partial.ctx.run_dir / "pairs.jsonl") ==
        read_file(full.ctx.run_dir / "pairs.jsonl"));
  CHECK(read_file(partial.ctx.run_dir / "descriptions.jsonl") ==
        read_file(full.ctx.run_dir / "descriptions.jsonl"));
}

TEST_CASE("items park after exhausting retries and block their dependents") {
  Fixture f;
  f.ctx.provider_override =
      std::make_shared<BrokenModelProvider>(f.ctx.config.synthesis.description_model.model_id);
  run_ingest(f.ctx);

  for (int attempt = 0; attempt < 3; ++attempt) {
    StageStats stats = run_synthesize(f.ctx);
    CHECK(stats.completed == 0);
    CHECK(stats.failed >= 2);
  }
  StageStats parked = run_synthesize(f.ctx);
  CHECK(parked.permanent_failed >= 2);  // both descriptions for at least one method

  // with the provider healthy again, blocked submissions stay parked but the
  // run converges instead of hanging
  f.ctx.provider_override = std::make_shared<MockProvider>();
  for (int attempt = 0; attempt < 3; ++attempt) run_synthesize(f.ctx);
  StageStats settled = run_synthesize(f.ctx);
  CHECK(settled.completed == 0);
  CHECK(settled.permanent_failed == 14);
  CHECK(fs::exists(f.ctx.run_dir / "pairs.jsonl"));
  CHECK(read_file(f.ctx.run_dir / "pairs.jsonl").empty());
}

TEST_CASE("replay without cassettes fails every item and records why") {
  Fixture f;
  run_ingest(f.ctx);
  RunContext replay = f.ctx;
  replay.mode = GatewayMode::replay;
  StageStats stats = run_synthesize(replay);
  CHECK(stats.completed == 0);
  CHECK(stats.failed == 4);  // descriptions fail, submissions stay blocked-pending
  RunLedger ledger(f.ctx.run_dir);
  bool found_reason = false;
  for (const auto& record : ledger.records())
    if (record.status == "failed" && record.detail.find("cassette") != std::string::npos)
      found_reason = true;
  CHECK(found_reason);
}

TEST_CASE("record then replay reproduces the pairs byte for byte") {
  Fixture recorded;
  recorded.synthesize_all();

  TempDir other;
  fs::create_directories(other.path() / "run");
  fs::copy(recorded.ctx.run_dir / "cassettes", other.path() / "run" / "cassettes",
           fs::copy_options::recursive);
  fs::copy_file(manifest_path(recorded.ctx.run_dir), manifest_path(other.path() / "run"));

  RunContext replay = recorded.ctx;
  replay.run_dir = other.path() / "run";
  replay.mode = GatewayMode::replay;
  run_synthesize(replay);
  CHECK(read_file(replay.run_dir / "pairs.jsonl") ==
        read_file(recorded.ctx.run_dir / "pairs.jsonl"));
}

TEST_CASE("gate summarizes clean rates per method") {
  Fixture f;
  f.synthesize_all();
  StageStats stats = run_gate(f.ctx);
  CHECK(stats.completed == 10);
  json gate = json::parse(read_file(f.ctx.run_dir / "eval" / "gate.json"));
  CHECK(gate["methods"]["sam"]["published"] == 5);
  CHECK(gate["methods"]["sam"]["rate"] == 1.0);
  CHECK(gate["methods"]["naive"]["published"] == 5);
}

TEST_CASE("grade covers the real cohort and one cohort per method") {
  Fixture f;
  f.synthesize_all();
  StageStats stats = run_grade(f.ctx);
  CHECK(stats.completed == 15);
  json one = json::parse(
      read_file(f.ctx.run_dir / "grades" / (sanitize_item("real:cs1/hw1/alice") + ".json")));
  double mean = one["mean"].get<double>();
  CHECK(mean >= 0.0);
  CHECK(mean <= 100.0);
  CHECK(one["marks"].size() == 3);
}

TEST_CASE("resemblance eval is deterministic and grouped per method") {
  Fixture f;
  f.synthesize_all();
  run_grade(f.ctx);
  run_eval_resemblance(f.ctx);
  std::string first = read_file(f.ctx.run_dir / "eval" / "resemblance.json");
  run_eval_resemblance(f.ctx);
  CHECK(first == read_file(f.ctx.run_dir / "eval" / "resemblance.json"));

  json eval = json::parse(first);
  CHECK(eval["sample"].size() == 5);
  CHECK(eval["assignments"].size() == 2);
  for (const char* method : {"sam", "naive"}) {
    const json& section = eval["methods"][method];
    CHECK(section["descriptions"]["n"] == 2);
    CHECK(section["submissions"]["n"] == 5);
    double f1 = section["submissions"]["f1_mean"].get<double>();
    CHECK(f1 > 0.0);
    CHECK(f1 <= 1.0);
    double pcc_val = section["submissions"]["length_pcc"].get<double>();
    CHECK(pcc_val >= -1.0);
    CHECK(pcc_val <= 1.0);
    CHECK(section["submissions"].contains("marks_pcc"));
  }
  CHECK(eval["series"]["submission_lengths"]["real"].size() == 5);
  CHECK(eval["series"]["submission_marks"]["sam"].size() == 5);
}

TEST_CASE("resemblance eval demands grades for the sample") {
  Fixture f;
  f.synthesize_all();
  CHECK_THROWS_AS(run_eval_resemblance(f.ctx), IncompleteInputs);
}

TEST_CASE("utility eval accounts for every expected record") {
  Fixture f;
  f.synthesize_all();
  StageStats stats = run_eval_utility(f.ctx);
  CHECK(stats.completed == 12);  // 3 models * 2 submissions * 2 cohorts
  json eval = json::parse(read_file(f.ctx.run_dir / "eval" / "utility.json"));
  CHECK(eval["expected"] == 12);
  CHECK(eval["records"] == 12);
  CHECK(eval["failures"].empty());

  std::set<std::string> aspects;
  for (const auto& row : eval["aspects"]) aspects.insert(row["aspect"].get<std::string>());
  CHECK(aspects.size() == 3);
  CHECK(eval["aspects"].size() == 6);  // each aspect in both cohorts
  for (const auto& row : eval["significance"]) {
    if (row.contains("p")) {
      CHECK(row["p"].get<double>() >= 0.0);
      CHECK(row["p"].get<double>() <= 1.0);
    }
  }

  std::istringstream labels(read_file(f.ctx.run_dir / "utility" / "labels.jsonl"));
  std::string line;
  std::size_t label_lines = 0;
  while (std::getline(labels, line)) ++label_lines;
  CHECK(label_lines == 12);
  CHECK(fs::exists(f.ctx.run_dir / "utility" / "aspect_summary.csv"));
}

TEST_CASE("ablation writes the four protection cells over shared tasks") {
  Fixture f;
  f.synthesize_all();
  run_ablate_privacy(f.ctx);
  json ablation = json::parse(read_file(f.ctx.run_dir / "eval" / "ablation.json"));
  CHECK(ablation["tasks"] == 5);
  REQUIRE(ablation["cells"].size() == 4);
  const auto& cells = ablation["cells"];
  CHECK(cells[0]["method"] == "naive");
  CHECK(cells[0]["prompt_protection"] == false);
  CHECK(cells[0]["gate_protection"] == false);
  CHECK(cells[1]["method"] == "sam");
  CHECK(cells[1]["prompt_protection"] == true);
  CHECK(cells[1]["gate_protection"] == true);
  CHECK(cells[2]["prompt_protection"] == true);
  CHECK(cells[2]["gate_protection"] == false);
  CHECK(cells[3]["prompt_protection"] == false);
  CHECK(cells[3]["gate_protection"] == true);
  for (const auto& cell : cells) CHECK(cell["published"].get<std::size_t>() <= 5);
}

TEST_CASE("matrix evaluates candidates and picks a description generator") {
  Fixture f;
  f.synthesize_all();
  StageStats stats = run_matrix(f.ctx);
  CHECK(stats.failed == 0);
  json matrix = json::parse(read_file(f.ctx.run_dir / "eval" / "matrix.json"));
  CHECK(matrix["description_rows"].size() == 2);
  CHECK(matrix["submission_rows"].size() == 2);
  std::string chosen = matrix["chosen_description_model"].get<std::string>();
  CHECK((chosen == "cand-a" || chosen == "cand-b-high"));
  for (const auto& row : matrix["submission_rows"]) {
    CHECK(row.contains("marks_pcc"));
    CHECK(row["n"].get<std::size_t>() == 5);
  }
}

TEST_CASE("matrix honors a pinned description model and rejects unknown ones") {
  Fixture f;
  f.ctx.config.matrix.fixed_description_model = "cand-b-high";
  f.synthesize_all();
  run_matrix(f.ctx);
  json matrix = json::parse(read_file(f.ctx.run_dir / "eval" / "matrix.json"));
  CHECK(matrix["chosen_description_model"] == "cand-b-high");

  f.ctx.config.matrix.fixed_description_model = "nonexistent";
  CHECK_THROWS_AS(run_matrix(f.ctx), ConfigError);
}

TEST_CASE("report renders tables and figures from the eval outputs") {
  Fixture f;
  f.synthesize_all();
  run_gate(f.ctx);
  run_grade(f.ctx);
  run_eval_resemblance(f.ctx);
  run_eval_utility(f.ctx);
  run_ablate_privacy(f.ctx);
  run_matrix(f.ctx);
  run_report(f.ctx);

  fs::path report = f.ctx.run_dir / "report";
  for (const char* name :
       {"table1.csv", "table2.csv", "table3.csv", "table3_best.json",
        "submission_length_violin.svg", "submission_length_violin.json",
        "submission_marks_violin.svg", "submission_marks_violin.json", "utility_aspects.svg",
        "utility_aspects.json"})
    CHECK(fs::exists(report / name));

  std::string table1 = read_file(report / "table1.csv");
  CHECK(table1.find("Synthetic Data,BERTScore F1,Std,PCC for Length,MAE,"
                    "PCC for Assignment Marks,MAE") == 0);
  CHECK(table1.find("by Naive mimicry") != std::string::npos);
  CHECK(table1.find("by SAM") != std::string::npos);
  CHECK(table1.find("by Naive mimicry") < table1.find("by SAM"));

  std::string table2 = read_file(report / "table2.csv");
  CHECK(table2.find("method,prompt_protection,gate_protection,n,rate") == 0);

  // report is idempotent
  run_report(f.ctx);
  CHECK(table1 == read_file(report / "table1.csv"));
}

TEST_CASE("report refuses to run without resemblance results") {
  Fixture f;
  run_ingest(f.ctx);
  CHECK_THROWS_AS(run_report(f.ctx), IncompleteInputs);
}
