#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "samkit/gateway.hpp"
#include "samkit/metrics.hpp"
#include "samkit/synthesis.hpp"

namespace samkit {

enum class Scale { likert3, binary };

std::string_view scale_name(Scale scale);
Scale parse_scale(std::string_view name);

struct Dimension {
  std::string name;
  std::string aspect;
  Scale scale = Scale::binary;
  bool invert = false;  // presence counts against the aspect (hallucinations)
};

/// Fixed, ordered set of feedback-quality dimensions. The stock set covers
/// content quality (likert), feedback effectiveness (binary) and
/// hallucinations (binary, inverted); a JSON file can replace it.
class DimensionRegistry {
 public:
  static DimensionRegistry defaults();
  static DimensionRegistry from_json_file(const std::filesystem::path& path);
  static DimensionRegistry from_dimensions(std::vector<Dimension> dims);

  const std::vector<Dimension>& dimensions() const { return dims_; }
  const Dimension& find(const std::string& name) const;
  std::vector<std::string> aspects() const;  // first-appearance order
  std::string dimension_list_block() const;  // "- name (scale)" lines for the labeling prompt

 private:
  std::vector<Dimension> dims_;
};

/// raw label -> [0, 1]: likert {1,2,3} -> {0, 0.5, 1}, binary identity,
/// inverted dimensions flipped.
double normalize_label(const Dimension& dim, int raw);

struct FeedbackRecord {
  std::string submission_id;
  std::string feedback_model;  // label of the generating model
  bool on_synthetic = false;
  std::string feedback_text;
  std::map<std::string, int> labels;  // raw values keyed by dimension name
};

std::string generate_feedback(const std::string& description, const std::string& submission,
                              const ModelSpec& model, Gateway& gateway,
                              const PromptLibrary& prompts);

struct LabelOptions {
  int reprompts = 1;
};

/// Labeler reply parsed as one "name: value" line per dimension. A reply
/// missing dimensions or carrying out-of-range values earns one corrective
/// reprompt; failure after that raises LabelParseFailure.
std::map<std::string, int> label_feedback(const std::string& description,
                                          const std::string& submission,
                                          const std::string& feedback,
                                          const DimensionRegistry& registry,
                                          const ModelSpec& labeler, Gateway& gateway,
                                          const PromptLibrary& prompts,
                                          const LabelOptions& options = {});

std::map<std::string, int> parse_labels(const std::string& response,
                                        const DimensionRegistry& registry);

/// Mean normalized value over the aspect's dimensions for one record.
double record_aspect_score(const std::map<std::string, int>& labels,
                           const DimensionRegistry& registry, const std::string& aspect);

struct AspectSummary {
  std::string aspect;
  std::size_t count = 0;
  double mean = 0.0;
  double std_dev = 0.0;  // population
};

std::vector<AspectSummary> aspect_summaries(const std::vector<FeedbackRecord>& records,
                                            const DimensionRegistry& registry);

struct AspectComparison {
  std::string aspect;
  double real_mean = 0.0;
  double synthetic_mean = 0.0;
  WelchResult welch;
};

/// Per-aspect Welch t-test between the records labeled on real submissions
/// and those labeled on synthetic ones.
std::vector<AspectComparison> cohort_significance(const std::vector<FeedbackRecord>& records,
                                                  const DimensionRegistry& registry);

}  // namespace samkit
