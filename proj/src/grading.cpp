#include "samkit/grading.hpp"

#include <algorithm>
#include <cstdlib>
#include <future>

#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

std::optional<double> parse_mark(const std::string& response) {
  std::optional<double> mark;
  for (auto& raw_line : split_lines(response)) {
    std::string line{trim(raw_line)};
    if (line.rfind("MARK:", 0) != 0) continue;
    std::string rest{trim(std::string_view(line).substr(5))};
    if (rest.empty()) continue;
    char* end = nullptr;
    double value = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) continue;
    // Trailing junk after the number (units, prose) disqualifies the line.
    if (!trim(std::string_view(end)).empty() && *end != '%') continue;
    mark = value;
  }
  return mark;
}

double grade_once(const std::string& description, const std::string& submission,
                  const ModelSpec& grader, Gateway& gateway, const PromptLibrary& prompts,
                  const GradeOptions& options) {
  if (trim(description).empty() || trim(submission).empty())
    throw EmptyText("grading needs both a description and a submission");
  std::vector<Message> messages = {
      {"user", prompts.render("grading",
                              {{"description", description}, {"submission", submission}})}};
  int turns = 1 + std::max(0, options.reprompts);
  for (int turn = 1; turn <= turns; ++turn) {
    Completion completion = gateway.complete(grader, messages);
    if (auto mark = parse_mark(completion.text))
      return std::clamp(*mark, options.min_mark, options.max_mark);
    if (turn == turns) break;
    messages.push_back({"assistant", completion.text});
    messages.push_back({"user",
                        "Your reply did not include a parsable mark. Reply again and end with a "
                        "single line of the form:\nMARK: <number>"});
  }
  throw GradeParseFailure("grader " + model_spec_label(grader) +
                          " produced no parsable mark line");
}

PanelGrade grade_panel(const std::string& description, const std::string& submission,
                       const std::vector<ModelSpec>& graders, Gateway& gateway,
                       const PromptLibrary& prompts, const GradeOptions& options) {
  if (graders.empty()) throw ConfigError("grading panel has no graders");
  std::vector<std::future<double>> futures;
  futures.reserve(graders.size());
  for (const auto& grader : graders)
    futures.push_back(std::async(std::launch::async, [&, grader] {
      return grade_once(description, submission, grader, gateway, prompts, options);
    }));
  PanelGrade panel;
  panel.marks.resize(graders.size());
  double sum = 0.0;
  std::size_t available = 0;
  for (std::size_t i = 0; i < futures.size(); ++i) {
    try {
      double mark = futures[i].get();
      panel.marks[i] = mark;
      sum += mark;
      ++available;
    } catch (const Error&) {
      panel.degraded = true;
    }
  }
  if (available == 0)
    throw PanelFailure("every grader in the panel failed to produce a mark");
  panel.mean = sum / static_cast<double>(available);
  return panel;
}

}  // namespace samkit
