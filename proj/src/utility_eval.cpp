#include "samkit/utility_eval.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include <nlohmann/json.hpp>

#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

std::string_view scale_name(Scale scale) {
  return scale == Scale::likert3 ? "likert3" : "binary";
}

Scale parse_scale(std::string_view name) {
  if (name == "likert3") return Scale::likert3;
  if (name == "binary") return Scale::binary;
  throw ConfigError("unknown label scale: " + std::string(name));
}

DimensionRegistry DimensionRegistry::defaults() {
  std::vector<Dimension> dims = {
      {"alignment_with_goals", "content", Scale::likert3, false},
      {"specificity", "content", Scale::likert3, false},
      {"motivational_tone", "content", Scale::likert3, false},
      {"strengths", "content", Scale::likert3, false},
      {"weaknesses", "content", Scale::likert3, false},
      {"feed_up", "effectiveness", Scale::binary, false},
      {"feed_back", "effectiveness", Scale::binary, false},
      {"feed_forward", "effectiveness", Scale::binary, false},
      {"level_task", "effectiveness", Scale::binary, false},
      {"level_process", "effectiveness", Scale::binary, false},
      {"level_self_regulation", "effectiveness", Scale::binary, false},
      {"level_self", "effectiveness", Scale::binary, false},
      {"context_conflicting", "hallucination", Scale::binary, true},
      {"input_conflicting", "hallucination", Scale::binary, true},
      {"fact_conflicting", "hallucination", Scale::binary, true},
  };
  return from_dimensions(std::move(dims));
}

DimensionRegistry DimensionRegistry::from_dimensions(std::vector<Dimension> dims) {
  if (dims.empty()) throw ConfigError("dimension registry is empty");
  std::set<std::string> seen;
  for (const auto& dim : dims) {
    if (trim(dim.name).empty()) throw ConfigError("dimension with an empty name");
    if (trim(dim.aspect).empty())
      throw ConfigError("dimension " + dim.name + " has no aspect");
    if (!seen.insert(dim.name).second)
      throw ConfigError("duplicate dimension name: " + dim.name);
  }
  DimensionRegistry registry;
  registry.dims_ = std::move(dims);
  return registry;
}

DimensionRegistry DimensionRegistry::from_json_file(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad dimension file " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ConfigError("dimension file must hold a JSON array");
  std::vector<Dimension> dims;
  for (const auto& entry : doc) {
    if (!entry.is_object()) throw ConfigError("dimension entries must be objects");
    Dimension dim;
    try {
      dim.name = entry.at("name").get<std::string>();
      dim.aspect = entry.at("aspect").get<std::string>();
      dim.scale = parse_scale(entry.at("scale").get<std::string>());
      dim.invert = entry.value("invert", false);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad dimension entry: ") + e.what());
    }
    dims.push_back(std::move(dim));
  }
  return from_dimensions(std::move(dims));
}

const Dimension& DimensionRegistry::find(const std::string& name) const {
  for (const auto& dim : dims_)
    if (dim.name == name) return dim;
  throw NotFound("unknown dimension: " + name);
}

std::vector<std::string> DimensionRegistry::aspects() const {
  std::vector<std::string> out;
  for (const auto& dim : dims_)
    if (std::find(out.begin(), out.end(), dim.aspect) == out.end()) out.push_back(dim.aspect);
  return out;
}

std::string DimensionRegistry::dimension_list_block() const {
  std::string out;
  for (const auto& dim : dims_) {
    out += "- ";
    out += dim.name;
    out += " (";
    out += scale_name(dim.scale);
    out += ")\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

double normalize_label(const Dimension& dim, int raw) {
  double value;
  if (dim.scale == Scale::likert3) {
    if (raw < 1 || raw > 3)
      throw LabelParseFailure("likert label out of range for " + dim.name);
    value = (raw - 1) / 2.0;
  } else {
    if (raw != 0 && raw != 1)
      throw LabelParseFailure("binary label out of range for " + dim.name);
    value = raw;
  }
  return dim.invert ? 1.0 - value : value;
}

std::string generate_feedback(const std::string& description, const std::string& submission,
                              const ModelSpec& model, Gateway& gateway,
                              const PromptLibrary& prompts) {
  if (trim(description).empty() || trim(submission).empty())
    throw EmptyText("feedback needs both a description and a submission");
  std::vector<Message> messages = {
      {"user", prompts.render("feedback",
                              {{"description", description}, {"submission", submission}})}};
  Completion completion = gateway.complete(model, messages);
  std::string text{trim(completion.text)};
  if (text.empty()) throw EmptyText("feedback model returned an empty reply");
  return text;
}

std::map<std::string, int> parse_labels(const std::string& response,
                                        const DimensionRegistry& registry) {
  std::map<std::string, int> labels;
  for (auto& raw_line : split_lines(response)) {
    std::string line{trim(raw_line)};
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string name{trim(std::string_view(line).substr(0, colon))};
    // Tolerate list markers in front of the dimension name.
    while (!name.empty() && (name.front() == '-' || name.front() == '*' || name.front() == ' '))
      name.erase(name.begin());
    std::string rest{trim(std::string_view(line).substr(colon + 1))};
    if (rest.empty()) continue;
    char* end = nullptr;
    long value = std::strtol(rest.c_str(), &end, 10);
    if (end == rest.c_str()) continue;
    labels[name] = static_cast<int>(value);
  }
  std::map<std::string, int> out;
  for (const auto& dim : registry.dimensions()) {
    auto it = labels.find(dim.name);
    if (it == labels.end())
      throw LabelParseFailure("labeler reply is missing dimension " + dim.name);
    normalize_label(dim, it->second);  // range check only
    out[dim.name] = it->second;
  }
  return out;
}

std::map<std::string, int> label_feedback(const std::string& description,
                                          const std::string& submission,
                                          const std::string& feedback,
                                          const DimensionRegistry& registry,
                                          const ModelSpec& labeler, Gateway& gateway,
                                          const PromptLibrary& prompts,
                                          const LabelOptions& options) {
  if (trim(feedback).empty()) throw EmptyText("no feedback text to label");
  std::vector<Message> messages = {
      {"user", prompts.render("labeling", {{"description", description},
                                           {"submission", submission},
                                           {"feedback", feedback},
                                           {"dimension_list", registry.dimension_list_block()}})}};
  int turns = 1 + std::max(0, options.reprompts);
  for (int turn = 1; turn <= turns; ++turn) {
    Completion completion = gateway.complete(labeler, messages);
    try {
      return parse_labels(completion.text, registry);
    } catch (const LabelParseFailure&) {
      if (turn == turns) throw;
      messages.push_back({"assistant", completion.text});
      messages.push_back({"user",
                          "Your reply could not be parsed. Reply again with exactly one line per "
                          "dimension, in the order listed, formatted as \"name: value\"."});
    }
  }
  throw LabelParseFailure("labeler produced no parsable reply");
}

double record_aspect_score(const std::map<std::string, int>& labels,
                           const DimensionRegistry& registry, const std::string& aspect) {
  std::vector<double> values;
  for (const auto& dim : registry.dimensions()) {
    if (dim.aspect != aspect) continue;
    auto it = labels.find(dim.name);
    if (it == labels.end())
      throw LabelParseFailure("record is missing dimension " + dim.name);
    values.push_back(normalize_label(dim, it->second));
  }
  if (values.empty()) throw NotFound("no dimensions under aspect " + aspect);
  return mean_of(values);
}

std::vector<AspectSummary> aspect_summaries(const std::vector<FeedbackRecord>& records,
                                            const DimensionRegistry& registry) {
  if (records.empty()) throw EmptyInput("no feedback records to summarize");
  std::vector<AspectSummary> out;
  for (const auto& aspect : registry.aspects()) {
    std::vector<double> scores;
    scores.reserve(records.size());
    for (const auto& record : records)
      scores.push_back(record_aspect_score(record.labels, registry, aspect));
    AspectSummary summary;
    summary.aspect = aspect;
    summary.count = scores.size();
    summary.mean = mean_of(scores);
    summary.std_dev = population_std(scores);
    out.push_back(summary);
  }
  return out;
}

std::vector<AspectComparison> cohort_significance(const std::vector<FeedbackRecord>& records,
                                                  const DimensionRegistry& registry) {
  std::vector<AspectComparison> out;
  for (const auto& aspect : registry.aspects()) {
    std::vector<double> real_scores, synthetic_scores;
    for (const auto& record : records) {
      double score = record_aspect_score(record.labels, registry, aspect);
      (record.on_synthetic ? synthetic_scores : real_scores).push_back(score);
    }
    AspectComparison comparison;
    comparison.aspect = aspect;
    comparison.real_mean = mean_of(real_scores);
    comparison.synthetic_mean = mean_of(synthetic_scores);
    comparison.welch = welch_t_test(real_scores, synthetic_scores);
    out.push_back(comparison);
  }
  return out;
}

}  // namespace samkit
