#include <memory>

#include "doctest.h"
#include "samkit/errors.hpp"
#include "samkit/grading.hpp"

using namespace samkit;

namespace {
const char* kDescription = "Essay task. Rubric: content 70, style 30.";
const char* kSubmission = "An essay that argues reasonably well.";
}  // namespace

TEST_CASE("parse_mark reads the last MARK line") {
  CHECK(parse_mark("MARK: 85") == 85.0);
  CHECK(parse_mark("reasoning...\nMARK: 72.5\n") == 72.5);
  CHECK(parse_mark("MARK: 60\nrevised opinion\nMARK: 64") == 64.0);
  CHECK(parse_mark("  MARK: 58  ") == 58.0);
  CHECK(parse_mark("MARK: 91%") == 91.0);
  CHECK_FALSE(parse_mark("the mark is 85").has_value());
  CHECK_FALSE(parse_mark("MARK: none").has_value());
  CHECK_FALSE(parse_mark("MARK:").has_value());
  CHECK_FALSE(parse_mark("MARK: 85 out of 100").has_value());
  CHECK_FALSE(parse_mark("").has_value());
}

TEST_CASE("grade_once parses and clamps") {
  auto scripted = std::make_shared<ScriptedProvider>();
  scripted->push("The rubric is mostly satisfied.\nMARK: 81");
  Gateway gateway({GatewayMode::live, {}, {}, 8}, scripted);
  CHECK(grade_once(kDescription, kSubmission, ModelSpec{"grader", {}}, gateway,
                   PromptLibrary::builtin()) == 81.0);

  scripted->push("Generous day.\nMARK: 140");
  CHECK(grade_once(kDescription, kSubmission, ModelSpec{"grader", {}}, gateway,
                   PromptLibrary::builtin()) == 100.0);
  scripted->push("Harsh day.\nMARK: -3");
  CHECK(grade_once(kDescription, kSubmission, ModelSpec{"grader", {}}, gateway,
                   PromptLibrary::builtin()) == 0.0);
}

TEST_CASE("grade_once reprompts once with the earlier reply attached") {
  auto scripted = std::make_shared<ScriptedProvider>();
  scripted->push("I would award a high mark.");
  scripted->push("MARK: 77");
  Gateway gateway({GatewayMode::live, {}, {}, 8}, scripted);
  CHECK(grade_once(kDescription, kSubmission, ModelSpec{"grader", {}}, gateway,
                   PromptLibrary::builtin()) == 77.0);
  CHECK(scripted->calls() == 2);

  scripted->push("no mark here");
  scripted->push("still no mark");
  CHECK_THROWS_AS((void)grade_once(kDescription, kSubmission, ModelSpec{"grader", {}}, gateway,
                                   PromptLibrary::builtin()),
                  GradeParseFailure);
}

TEST_CASE("grade_panel averages available marks and flags dropouts") {
  auto mock = std::make_shared<MockProvider>();
  Gateway gateway({GatewayMode::live, {}, {}, 8}, mock);
  std::vector<ModelSpec> graders = {{"grader-a", {}}, {"grader-b", {}}, {"grader-c", {}}};
  auto panel = grade_panel(kDescription, kSubmission, graders, gateway, PromptLibrary::builtin());
  CHECK_FALSE(panel.degraded);
  REQUIRE(panel.marks.size() == 3);
  double sum = 0;
  for (auto mark : panel.marks) {
    REQUIRE(mark.has_value());
    sum += *mark;
  }
  CHECK(panel.mean == doctest::Approx(sum / 3));
  // Same submission, same panel: deterministic marks.
  auto again = grade_panel(kDescription, kSubmission, graders, gateway, PromptLibrary::builtin());
  CHECK(again.marks == panel.marks);
}

TEST_CASE("grade_panel degrades when one grader fails and fails when all do") {
  auto scripted = std::make_shared<ScriptedProvider>();
  // Panel of two, sequential inflight limit 1 keeps the script order stable:
  // grader one consumes two bad replies, grader two succeeds directly.
  scripted->push("bad");
  scripted->push("bad again");
  scripted->push("MARK: 66");
  Gateway gateway({GatewayMode::live, {}, {}, 1}, scripted);
  std::vector<ModelSpec> graders = {{"grader-a", {}}, {"grader-b", {}}};
  auto panel = grade_panel(kDescription, kSubmission, graders, gateway,
                           PromptLibrary::builtin());
  CHECK(panel.degraded);
  CHECK(panel.mean == 66.0);
  CHECK((panel.marks[0].has_value() ? *panel.marks[0] : *panel.marks[1]) == 66.0);

  auto empty = std::make_shared<ScriptedProvider>();
  empty->push("no mark");
  empty->push("no mark");
  empty->push("no mark");
  empty->push("no mark");
  Gateway gateway2({GatewayMode::live, {}, {}, 1}, empty);
  CHECK_THROWS_AS((void)grade_panel(kDescription, kSubmission, graders, gateway2,
                                    PromptLibrary::builtin()),
                  PanelFailure);
}
