#include <memory>

#include "doctest.h"
#include "samkit/errors.hpp"
#include "samkit/gateway.hpp"
#include "samkit/synthesis.hpp"
#include "samkit/util.hpp"
#include "test_support.hpp"

using namespace samkit;

namespace {

MimicryTask description_task() {
  MimicryTask task;
  task.kind = ArtifactKind::description;
  task.real_description = "Write an essay on synthetic data.\nRubric: clarity 50, depth 50.";
  return task;
}

MimicryTask submission_task() {
  MimicryTask task;
  task.kind = ArtifactKind::submission;
  task.real_description = "Write an essay on synthetic data.\nRubric: clarity 50, depth 50.";
  task.synthetic_description = "Compose an essay about generated corpora.";
  task.real_submission = "Synthetic data is useful because privacy matters a lot today.";
  task.real_submission_word_count = 847;
  return task;
}

// Payload lines between <<< and >>> fences, in order.
std::vector<std::string> payload_blocks(const std::string& prompt) {
  std::vector<std::string> blocks;
  std::size_t pos = 0;
  while (true) {
    auto open = prompt.find("<<<\n", pos);
    if (open == std::string::npos) break;
    auto close = prompt.find("\n>>>", open);
    REQUIRE(close != std::string::npos);
    blocks.push_back(prompt.substr(open + 4, close - open - 4));
    pos = close + 4;
  }
  return blocks;
}

}  // namespace

TEST_CASE("four-step prompt carries the steps and the evaluation dimensions") {
  auto messages = build_sam_prompt(description_task(), PromptLibrary::builtin());
  REQUIRE(messages.size() == 1);
  CHECK(messages[0].role == "user");
  const std::string& prompt = messages[0].text;
  for (const char* step : {"Step 1.", "Step 2.", "Step 3.", "Step 4."})
    CHECK(prompt.find(step) != std::string::npos);
  CHECK(prompt.find("theme, objectives, writing style, length and rubric details") !=
        std::string::npos);
  CHECK(prompt.find("loop back to Step 2") != std::string::npos);
  CHECK(prompt.find(description_task().real_description) != std::string::npos);
}

TEST_CASE("submission prompt states the literal real word count") {
  auto task = submission_task();
  auto messages = build_sam_prompt(task, PromptLibrary::builtin());
  const std::string& prompt = messages[0].text;
  CHECK(prompt.find("contains 847 words") != std::string::npos);
  CHECK(prompt.find("about 847 words") != std::string::npos);
  CHECK(prompt.find(task.real_submission) != std::string::npos);
  CHECK(prompt.find(task.synthetic_description) != std::string::npos);
}

TEST_CASE("word count falls back to counting the submission text") {
  auto task = submission_task();
  task.real_submission_word_count = 0;
  auto messages = build_sam_prompt(task, PromptLibrary::builtin());
  auto words = std::to_string(word_count(task.real_submission));
  CHECK(messages[0].text.find("contains " + words + " words") != std::string::npos);
}

TEST_CASE("privacy clause appears exactly when prompt protection is on") {
  auto task = submission_task();
  task.prompt_protection = false;
  auto off = build_sam_prompt(task, PromptLibrary::builtin())[0].text;
  CHECK(off.find("personal identifier") == std::string::npos);
  task.prompt_protection = true;
  auto on = build_sam_prompt(task, PromptLibrary::builtin())[0].text;
  CHECK(on.find("Do not note down any personal identifiers") != std::string::npos);
  CHECK(on.find("must not contain any personal identifier") != std::string::npos);
  // The clause rides inside steps 1 and 2, before step 3.
  CHECK(on.find("Do not note down") < on.find("Step 3."));
}

TEST_CASE("naive prompt is the single imitation sentence plus the same payload") {
  auto task = submission_task();
  auto naive = build_naive_prompt(task, PromptLibrary::builtin())[0].text;
  CHECK(naive.find("Please try to generate a university assignment submission by imitating "
                   "the following assignment submission.") != std::string::npos);
  CHECK(naive.find("Step 1") == std::string::npos);
  CHECK(naive.find("personal identifier") == std::string::npos);
  // Identical payload blocks as the four-step prompt, in the same order.
  auto sam = build_sam_prompt(task, PromptLibrary::builtin())[0].text;
  CHECK(payload_blocks(naive) == payload_blocks(sam));

  auto desc = build_naive_prompt(description_task(), PromptLibrary::builtin())[0].text;
  CHECK(desc.find("Please try to generate a university assignment description by imitating "
                  "the following assignment description.") != std::string::npos);
  CHECK(payload_blocks(desc) ==
        payload_blocks(build_sam_prompt(description_task(), PromptLibrary::builtin())[0].text));
}

TEST_CASE("naive prompt ignores the privacy flag") {
  auto task = submission_task();
  task.prompt_protection = true;
  auto naive = build_naive_prompt(task, PromptLibrary::builtin())[0].text;
  CHECK(naive.find("personal identifier") == std::string::npos);
}

TEST_CASE("incomplete tasks are rejected") {
  MimicryTask task;
  CHECK_THROWS_AS((void)build_sam_prompt(task, PromptLibrary::builtin()), IncompleteTask);
  task = submission_task();
  task.synthetic_description.clear();
  CHECK_THROWS_AS((void)build_sam_prompt(task, PromptLibrary::builtin()), IncompleteTask);
  task = submission_task();
  task.real_submission = "   ";
  CHECK_THROWS_AS((void)build_naive_prompt(task, PromptLibrary::builtin()), IncompleteTask);
}

TEST_CASE("template files on disk match the compiled-in defaults") {
  auto builtin = PromptLibrary::builtin();
  auto from_disk = PromptLibrary::from_dir(SAMKIT_TEMPLATE_DIR);
  for (const auto& name : builtin.names())
    CHECK_MESSAGE(builtin.raw(name) == from_disk.raw(name), "template ", name);
}

TEST_CASE("template override directory wins over builtins") {
  TempDir dir;
  atomic_write_file(dir.path() / "grading.txt", "Custom {{description}} / {{submission}}");
  auto lib = PromptLibrary::from_dir(dir.path());
  CHECK(lib.raw("grading") == "Custom {{description}} / {{submission}}");
  // Untouched names keep the builtin text.
  CHECK(lib.raw("privacy_judge") == PromptLibrary::builtin().raw("privacy_judge"));
  CHECK_THROWS_AS((void)PromptLibrary::from_dir(dir.path() / "missing"), NotFound);
}

TEST_CASE("render rejects unknown placeholders and unterminated braces") {
  auto lib = PromptLibrary::builtin();
  CHECK_THROWS_AS((void)lib.render("grading", {{"description", "d"}}), TemplateError);
  CHECK_THROWS_AS((void)lib.raw("nonexistent"), NotFound);
}

TEST_CASE("extraction takes the last complete marked block") {
  CHECK(extract_synthetic("BEGIN_SYNTHETIC\nfirst\nEND_SYNTHETIC") == "first");
  CHECK(extract_synthetic("draft: BEGIN_SYNTHETIC\na\nEND_SYNTHETIC then "
                          "BEGIN_SYNTHETIC\nfinal text\nEND_SYNTHETIC trailing") ==
        "final text");
  // Unterminated final block falls back to the last complete one.
  CHECK(extract_synthetic("BEGIN_SYNTHETIC\nok\nEND_SYNTHETIC\nBEGIN_SYNTHETIC\ndangling") ==
        "ok");
  CHECK_THROWS_AS((void)extract_synthetic("no markers at all"), ExtractionFailure);
  CHECK_THROWS_AS((void)extract_synthetic("BEGIN_SYNTHETIC\n  \nEND_SYNTHETIC"),
                  ExtractionFailure);
  CHECK_THROWS_AS((void)extract_synthetic("END_SYNTHETIC\nBEGIN_SYNTHETIC"), ExtractionFailure);
}

TEST_CASE("synthesize retries generation while extraction fails") {
  auto scripted = std::make_shared<ScriptedProvider>();
  scripted->push("thinking aloud, no markers");
  scripted->push("BEGIN_SYNTHETIC\na solid synthetic essay\nEND_SYNTHETIC");
  Gateway gateway({GatewayMode::live, {}, {}, 8}, scripted);
  SynthesisOptions options;
  options.source_id = "c1/a1/s1";
  auto pair = synthesize(description_task(), ModelSpec{"gpt-4o", {}}, gateway,
                         PromptLibrary::builtin(), options);
  CHECK(pair.extraction_ok);
  CHECK(pair.synthetic_text == "a solid synthetic essay");
  CHECK(pair.attempts == 2);
  CHECK(pair.source_id == "c1/a1/s1");
  CHECK(scripted->calls() == 2);
}

TEST_CASE("synthesize gives up after the extraction retry cap") {
  auto scripted = std::make_shared<ScriptedProvider>();
  for (int i = 0; i < 3; ++i) scripted->push("still no markers");
  Gateway gateway({GatewayMode::live, {}, {}, 8}, scripted);
  auto pair = synthesize(description_task(), ModelSpec{"gpt-4o", {}}, gateway,
                         PromptLibrary::builtin());
  CHECK_FALSE(pair.extraction_ok);
  CHECK(pair.synthetic_text.empty());
  CHECK(pair.attempts == 3);
  CHECK(scripted->calls() == 3);
}
