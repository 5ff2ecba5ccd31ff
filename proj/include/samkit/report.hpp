#pragma once

#include <optional>
#include <string>
#include <vector>

#include "samkit/metrics.hpp"
#include "samkit/privacy.hpp"

namespace samkit {

struct ResemblanceRow {
  std::string label;
  SimilaritySummary f1;
  double length_pcc = 0.0;
  double length_mae = 0.0;
  // absent for description rows, which have no marks columns
  std::optional<double> marks_pcc;
  std::optional<double> marks_mae;
};

/// Fidelity table: one group of rows for descriptions, one for submissions.
/// Columns: label, BERTScore F1, Std, PCC for Length, MAE, PCC for
/// Assignment Marks, MAE; marks cells stay blank on description rows.
/// Deterministic bytes for identical inputs.
std::string render_resemblance_csv(const std::vector<ResemblanceRow>& description_rows,
                                   const std::vector<ResemblanceRow>& submission_rows);

/// Protection-ablation table, one row per cell in report order.
std::string render_ablation_csv(const std::vector<AblationCell>& cells);

/// Best row per comparable column (max for F1 and PCC, min for MAE), as a
/// JSON sidecar keyed by group then column.
std::string render_best_flags_json(const std::vector<ResemblanceRow>& description_rows,
                                   const std::vector<ResemblanceRow>& submission_rows);

struct PlotSeries {
  std::string label;
  std::vector<double> values;
};

/// Kernel-density violin per series, shared y axis. Pure function of its
/// inputs; every coordinate is formatted with a fixed precision.
std::string render_violin_svg(const std::string& title, const std::string& y_label,
                              const std::vector<PlotSeries>& series);

/// The numeric series behind a violin plot, for assertions on data rather
/// than pixels.
std::string render_series_sidecar_json(const std::vector<PlotSeries>& series);

struct AspectBar {
  std::string aspect;
  std::string cohort;
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t n = 0;
};

/// Grouped bar chart of aspect means per cohort with std error bars.
std::string render_aspect_bar_svg(const std::string& title, const std::vector<AspectBar>& bars);
std::string render_aspect_sidecar_json(const std::vector<AspectBar>& bars);

}  // namespace samkit
