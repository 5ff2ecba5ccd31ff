#pragma once

#include <optional>
#include <string>
#include <vector>

#include "samkit/gateway.hpp"
#include "samkit/synthesis.hpp"

namespace samkit {

/// Numeric mark from the last "MARK:" line of a grader reply, unclamped.
std::optional<double> parse_mark(const std::string& response);

struct GradeOptions {
  double min_mark = 0.0;
  double max_mark = 100.0;
  int reprompts = 1;  // extra turns granted when the reply has no parsable mark
};

/// One grader's mark for a submission, clamped to the configured range.
/// A reply without a parsable mark earns one corrective reprompt carrying the
/// earlier reply; failure after that raises GradeParseFailure.
double grade_once(const std::string& description, const std::string& submission,
                  const ModelSpec& grader, Gateway& gateway, const PromptLibrary& prompts,
                  const GradeOptions& options = {});

struct PanelGrade {
  double mean = 0.0;
  std::vector<std::optional<double>> marks;  // one slot per grader, in panel order
  bool degraded = false;                     // some grader dropped out
};

/// Marks from every panel grader in parallel, averaged over those that
/// produced one. All graders failing raises PanelFailure.
PanelGrade grade_panel(const std::string& description, const std::string& submission,
                       const std::vector<ModelSpec>& graders, Gateway& gateway,
                       const PromptLibrary& prompts, const GradeOptions& options = {});

}  // namespace samkit
